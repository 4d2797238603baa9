//! Planar geometry primitives shared by the analytic and sampling layers:
//! points, regions of integration, region-weighted densities, and disc
//! automorphisms.

use thiserror::Error;

/// A point of the plane, used both as a position and as a displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Point on the circle of radius `r` at angle `theta`.
    pub fn polar(r: f64, theta: f64) -> Self {
        Point::new(r * theta.cos(), r * theta.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Complex product, reading the point as x + iy.
    pub fn cmul(self, other: Point) -> Point {
        Point::new(
            self.x * other.x - self.y * other.y,
            self.x * other.y + self.y * other.x,
        )
    }

    /// Complex conjugate.
    pub fn conj(self) -> Point {
        Point::new(self.x, -self.y)
    }

    /// Complex quotient self / other; other must be nonzero.
    pub fn cdiv(self, other: Point) -> Point {
        let d = other.norm_sq();
        Point::new(
            (self.x * other.x + self.y * other.y) / d,
            (self.y * other.x - self.x * other.y) / d,
        )
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Error raised by constructors and evaluations that leave their domain.
#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("point ({0}, {1}) lies outside the open domain")]
    OutsideDomain(f64, f64),
    #[error("moebius pole must satisfy |a| < 1, got |a| = {0}")]
    PoleOutsideDisc(f64),
    #[error("region is degenerate: {0}")]
    DegenerateRegion(String),
}

/// A measurable subset of the plane over which occupation times and area
/// integrals are taken. Discs and axis-aligned rectangles cover every test
/// target; both have exact areas and exact membership predicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Disc { center: Point, radius: f64 },
    Rect { lo: Point, hi: Point },
}

impl Region {
    pub fn disc(cx: f64, cy: f64, radius: f64) -> Self {
        Region::Disc {
            center: Point::new(cx, cy),
            radius,
        }
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Region::Rect {
            lo: Point::new(x0.min(x1), y0.min(y1)),
            hi: Point::new(x0.max(x1), y0.max(y1)),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Region::Disc { radius, .. } => std::f64::consts::PI * radius * radius,
            Region::Rect { lo, hi } => (hi.x - lo.x) * (hi.y - lo.y),
        }
    }

    /// Closed membership test.
    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Region::Disc { center, radius } => {
                let dx = p.x - center.x;
                let dy = p.y - center.y;
                dx * dx + dy * dy <= radius * radius
            }
            Region::Rect { lo, hi } => p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y,
        }
    }

    /// Farthest distance from the origin to the region (used to check
    /// containment in a disc around the origin).
    pub fn outer_radius(&self) -> f64 {
        match *self {
            Region::Disc { center, radius } => center.norm() + radius,
            Region::Rect { lo, hi } => {
                let corners = [
                    lo,
                    hi,
                    Point::new(lo.x, hi.y),
                    Point::new(hi.x, lo.y),
                ];
                corners.iter().map(|c| c.norm()).fold(0.0, f64::max)
            }
        }
    }

    /// Nearest distance from the origin to any point of the region (0 if the
    /// region covers the origin).
    pub fn inner_radius(&self) -> f64 {
        match *self {
            Region::Disc { center, radius } => (center.norm() - radius).max(0.0),
            Region::Rect { lo, hi } => {
                // clamp the origin into the rectangle and measure the gap
                let cx = 0.0f64.clamp(lo.x, hi.x);
                let cy = 0.0f64.clamp(lo.y, hi.y);
                Point::new(cx, cy).norm()
            }
        }
    }

    /// Exact lower bound on the distance between two regions; 0 when they
    /// touch or overlap.
    pub fn separation(&self, other: &Region) -> f64 {
        match (*self, *other) {
            (
                Region::Disc { center: c1, radius: r1 },
                Region::Disc { center: c2, radius: r2 },
            ) => (c1.dist(c2) - r1 - r2).max(0.0),
            (Region::Rect { lo: a0, hi: a1 }, Region::Rect { lo: b0, hi: b1 }) => {
                let gx = (b0.x - a1.x).max(a0.x - b1.x).max(0.0);
                let gy = (b0.y - a1.y).max(a0.y - b1.y).max(0.0);
                gx.hypot(gy)
            }
            (Region::Disc { center, radius }, Region::Rect { lo, hi })
            | (Region::Rect { lo, hi }, Region::Disc { center, radius }) => {
                let cx = center.x.clamp(lo.x, hi.x);
                let cy = center.y.clamp(lo.y, hi.y);
                (center.dist(Point::new(cx, cy)) - radius).max(0.0)
            }
        }
    }

    pub fn is_disjoint_from(&self, other: &Region) -> bool {
        self.separation(other) > 0.0
    }
}

/// Weighted sum of region indicators, used as a test density against the
/// occupation field: rho = sum_k c_k 1_{R_k}.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Density {
    pub terms: Vec<(Region, f64)>,
}

impl Density {
    pub fn indicator(region: Region) -> Self {
        Density {
            terms: vec![(region, 1.0)],
        }
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.terms
            .iter()
            .map(|(r, c)| if r.contains(p) { *c } else { 0.0 })
            .sum()
    }

    /// Integral of the density over the plane.
    pub fn total_mass(&self) -> f64 {
        // Terms may overlap; the integral of the sum is still the sum of the
        // integrals because each term is integrated separately.
        self.terms.iter().map(|(r, c)| c * r.area()).sum()
    }
}

/// Automorphism of the unit disc: z -> e^{i phi} (z - a) / (1 - conj(a) z)
/// with pole |a| < 1. Maps the open disc onto itself and the unit circle to
/// itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoebiusMap {
    pole: Point,
    phase: f64,
}

impl MoebiusMap {
    pub fn new(pole: Point, phase: f64) -> Result<Self, GeomError> {
        if pole.norm() >= 1.0 {
            return Err(GeomError::PoleOutsideDisc(pole.norm()));
        }
        Ok(MoebiusMap { pole, phase })
    }

    pub fn identity() -> Self {
        MoebiusMap {
            pole: Point::ORIGIN,
            phase: 0.0,
        }
    }

    pub fn pole(&self) -> Point {
        self.pole
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// Evaluate the map at a point of the closed disc.
    pub fn eval(&self, z: Point) -> Result<Point, GeomError> {
        if z.norm() > 1.0 + 1e-12 {
            return Err(GeomError::OutsideDomain(z.x, z.y));
        }
        let num = z - self.pole;
        let den = Point::new(1.0, 0.0) - self.pole.conj().cmul(z);
        let rot = Point::polar(1.0, self.phase);
        Ok(rot.cmul(num.cdiv(den)))
    }

    /// Complex derivative at z: e^{i phi} (1 - |a|^2) / (1 - conj(a) z)^2.
    pub fn derivative(&self, z: Point) -> Result<Point, GeomError> {
        if z.norm() > 1.0 + 1e-12 {
            return Err(GeomError::OutsideDomain(z.x, z.y));
        }
        let den = Point::new(1.0, 0.0) - self.pole.conj().cmul(z);
        let den_sq = den.cmul(den);
        let rot = Point::polar(1.0, self.phase);
        Ok(rot.scale(1.0 - self.pole.norm_sq()).cdiv(den_sq))
    }

    /// Modulus of the complex derivative.
    pub fn derivative_norm(&self, z: Point) -> Result<f64, GeomError> {
        Ok(self.derivative(z)?.norm())
    }

    /// The inverse automorphism, again in pole/phase form.
    pub fn inverse(&self) -> MoebiusMap {
        // w = e^{i phi}(z - a)/(1 - conj(a) z)  =>  z = (e^{-i phi} w + a)/(1 + conj(a) e^{-i phi} w)
        // which is the automorphism with pole -a e^{i phi} and phase -phi.
        let pole = -self.pole.cmul(Point::polar(1.0, self.phase));
        MoebiusMap {
            pole,
            phase: -self.phase,
        }
    }

    /// Image of a disc region under the map. Disc automorphisms send circles
    /// to circles, so the image is again a disc; it is reconstructed from
    /// three boundary points. Rectangles are not preserved and are rejected.
    pub fn map_disc(&self, region: &Region) -> Result<Region, GeomError> {
        let (center, radius) = match *region {
            Region::Disc { center, radius } => (center, radius),
            Region::Rect { .. } => {
                return Err(GeomError::DegenerateRegion(
                    "moebius image of a rectangle is not a rectangle".into(),
                ))
            }
        };
        let p0 = self.eval(center + Point::new(radius, 0.0))?;
        let p1 = self.eval(center + Point::new(-radius, 0.0))?;
        let p2 = self.eval(center + Point::new(0.0, radius))?;
        let c = circumcenter(p0, p1, p2).ok_or_else(|| {
            GeomError::DegenerateRegion("image boundary points are collinear".into())
        })?;
        Ok(Region::Disc {
            center: c,
            radius: c.dist(p0),
        })
    }
}

/// Center of the circle through three non-collinear points.
fn circumcenter(a: Point, b: Point, c: Point) -> Option<Point> {
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    if d.abs() < 1e-14 {
        return None;
    }
    let ux = (a.norm_sq() * (b.y - c.y) + b.norm_sq() * (c.y - a.y) + c.norm_sq() * (a.y - b.y)) / d;
    let uy = (a.norm_sq() * (c.x - b.x) + b.norm_sq() * (a.x - c.x) + c.norm_sq() * (b.x - a.x)) / d;
    Some(Point::new(ux, uy))
}
