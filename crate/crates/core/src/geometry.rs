//! Angle conventions and rigid transforms shared by the matchers.
//!
//! Angles are in degrees, measured in image coordinates (x to the right,
//! y down) as `atan2(dy, dx)`.

/// Wraps an angle into (-180, 180].
pub fn wrap_deg(a: f64) -> f64 {
    let mut r = a % 360.0;
    if r <= -180.0 {
        r += 360.0;
    } else if r > 180.0 {
        r -= 360.0;
    }
    r
}

/// Normalizes an angle into [0, 360).
pub fn normalize_deg(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Bearing of the vector from `(x0, y0)` to `(x1, y1)`, in degrees.
pub fn bearing_deg(x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    (y1 - y0).atan2(x1 - x0).to_degrees()
}

/// Absolute wrapped difference, in [0, 180].
pub fn angle_diff_deg(a: f64, b: f64) -> f64 {
    wrap_deg(a - b).abs()
}

/// Circular mean of a set of angles. Returns `None` for an empty set or
/// when the resultant vanishes.
pub fn circular_mean_deg(angles: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut s, mut c, mut n) = (0.0, 0.0, 0usize);
    for a in angles {
        let r = a.to_radians();
        s += r.sin();
        c += r.cos();
        n += 1;
    }
    if n == 0 || (s.abs() < 1e-12 && c.abs() < 1e-12) {
        return None;
    }
    Some(wrap_deg(s.atan2(c).to_degrees()))
}

/// Translation plus rotation mapping points of one print into the frame
/// of another: `p' = R(rot) p + (dx, dy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub dx: f64,
    pub dy: f64,
    /// Degrees, in (-180, 180].
    pub rot: f64,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        dx: 0.0,
        dy: 0.0,
        rot: 0.0,
    };

    pub fn new(dx: f64, dy: f64, rot: f64) -> Self {
        Self {
            dx,
            dy,
            rot: wrap_deg(rot),
        }
    }

    /// Rotation by `rot` degrees about `(cx, cy)` followed by a shift.
    pub fn about(cx: f64, cy: f64, rot: f64, shift_x: f64, shift_y: f64) -> Self {
        let (s, c) = rot.to_radians().sin_cos();
        let rx = c * cx - s * cy;
        let ry = s * cx + c * cy;
        Self::new(cx - rx + shift_x, cy - ry + shift_y, rot)
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.rot.to_radians().sin_cos();
        (c * x - s * y + self.dx, s * x + c * y + self.dy)
    }

    /// Maps a direction angle (degrees) through the rotation part.
    pub fn apply_angle(&self, deg: f64) -> f64 {
        normalize_deg(deg + self.rot)
    }

    pub fn inverse(&self) -> Self {
        let (s, c) = self.rot.to_radians().sin_cos();
        // R^T (p - t)
        let ix = -(c * self.dx + s * self.dy);
        let iy = -(-s * self.dx + c * self.dy);
        Self::new(ix, iy, -self.rot)
    }

    /// Least-squares rigid motion carrying each `from` point onto its `to`
    /// partner. `None` for an empty list.
    pub fn fit(pairs: &[((f64, f64), (f64, f64))]) -> Option<Self> {
        if pairs.is_empty() {
            return None;
        }
        let n = pairs.len() as f64;
        let (mut ax, mut ay, mut bx, mut by) = (0.0, 0.0, 0.0, 0.0);
        for &((x0, y0), (x1, y1)) in pairs {
            ax += x0;
            ay += y0;
            bx += x1;
            by += y1;
        }
        let (ax, ay, bx, by) = (ax / n, ay / n, bx / n, by / n);
        let (mut dot, mut cross) = (0.0, 0.0);
        for &((x0, y0), (x1, y1)) in pairs {
            let (u0, v0, u1, v1) = (x0 - ax, y0 - ay, x1 - bx, y1 - by);
            dot += u0 * u1 + v0 * v1;
            cross += u0 * v1 - v0 * u1;
        }
        let rot = cross.atan2(dot).to_degrees();
        let r = Self::new(0.0, 0.0, rot);
        let (rx, ry) = r.apply(ax, ay);
        Some(Self::new(bx - rx, by - ry, rot))
    }
}
