//! Closed periodic cubic spline through an ordered set of control knots.
//!
//! The curve is parameterized by `s` in `[0, 1)`; knot `k` (0-based) sits at
//! `s_k = k / N`. Segment `k` covers `[s_k, s_{k+1})` and is stored in local
//! offset form
//!
//! ```text
//! u_k(s) = a t^3 + b t^2 + c t + d
//! v_k(s) = e t^3 + f t^2 + g t + h,     t = s - s_k
//! ```
//!
//! so derivatives with respect to `t` and `s` coincide. Coefficients follow
//! from interpolation plus C1/C2 continuity at every join, including the wrap
//! from the last knot back to the first.

use serde::{Deserialize, Serialize};

use crate::error::{PicsError, Result};
use crate::point::Point;
use crate::scalar::Scalar;

pub const MIN_KNOTS: usize = 4;

/// Knots closer than this (px) count as coincident.
pub const COINCIDENT_EPS: f64 = 1e-9;

/// Speed threshold below which curvature is undefined.
pub const SINGULAR_SPEED: f64 = 1e-12;

/// The trainable weights: ordered control knots in pixel coordinates plus
/// per-knot pin flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKnots<T>", into = "RawKnots<T>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct KnotVector<T> {
    knots: Vec<Point<T>>,
    pinned: Vec<bool>,
}

#[derive(Clone, Serialize, Deserialize)]
struct RawKnots<T> {
    knots: Vec<Point<T>>,
    pinned: Vec<bool>,
}

impl<T: Scalar> TryFrom<RawKnots<T>> for KnotVector<T> {
    type Error = PicsError;
    fn try_from(raw: RawKnots<T>) -> Result<Self> {
        KnotVector::with_pins(raw.knots, raw.pinned)
    }
}

impl<T: Scalar> From<KnotVector<T>> for RawKnots<T> {
    fn from(k: KnotVector<T>) -> Self {
        RawKnots {
            knots: k.knots,
            pinned: k.pinned,
        }
    }
}

impl<T: Scalar> KnotVector<T> {
    /// All knots free.
    pub fn new(knots: Vec<Point<T>>) -> Result<Self> {
        let n = knots.len();
        Self::with_pins(knots, vec![false; n])
    }

    pub fn with_pins(knots: Vec<Point<T>>, pinned: Vec<bool>) -> Result<Self> {
        validate(&knots)?;
        if pinned.len() != knots.len() {
            return Err(PicsError::PinCountMismatch {
                knots: knots.len(),
                pins: pinned.len(),
            });
        }
        Ok(Self { knots, pinned })
    }

    /// Build from an interleaved `[u0, v0, u1, v1, ...]` weight vector,
    /// keeping the pin flags of `self`.
    pub fn with_weights(&self, weights: &[T]) -> Result<Self> {
        if weights.len() != 2 * self.len() {
            return Err(PicsError::DimensionMismatch(format!(
                "expected {} weights, got {}",
                2 * self.len(),
                weights.len()
            )));
        }
        let knots = weights.chunks_exact(2).map(|w| Point::new(w[0], w[1])).collect();
        Self::with_pins(knots, self.pinned.clone())
    }

    /// Interleaved `[u0, v0, u1, v1, ...]`.
    pub fn weights(&self) -> Vec<T> {
        self.knots.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn knots(&self) -> &[Point<T>] {
        &self.knots
    }

    pub fn pinned(&self) -> &[bool] {
        &self.pinned
    }

    pub fn is_pinned(&self, i: usize) -> bool {
        self.pinned[i]
    }

    pub fn set_pinned(&mut self, i: usize, pinned: bool) {
        self.pinned[i] = pinned;
    }

    pub fn map_points(&self, f: impl Fn(Point<T>) -> Point<T>) -> Result<Self> {
        Self::with_pins(self.knots.iter().copied().map(f).collect(), self.pinned.clone())
    }

    pub fn translate(&self, by: Point<T>) -> Result<Self> {
        self.map_points(|p| p + by)
    }

    /// Same knots traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        let mut knots = self.knots.clone();
        let mut pinned = self.pinned.clone();
        knots.reverse();
        pinned.reverse();
        Self { knots, pinned }
    }

    pub fn centroid(&self) -> Point<T> {
        let n = T::from_count(self.len());
        let sum = self.knots.iter().fold(Point::default(), |acc: Point<T>, p| acc + *p);
        sum * (T::one() / n)
    }
}

fn validate<T: Scalar>(knots: &[Point<T>]) -> Result<()> {
    let n = knots.len();
    if n < MIN_KNOTS {
        return Err(PicsError::TooFewKnots(n));
    }
    if let Some(i) = knots.iter().position(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(PicsError::NonFiniteKnot(i));
    }
    let eps = T::lit(COINCIDENT_EPS);
    for i in 0..n {
        let j = (i + 1) % n;
        if knots[i].dist(knots[j]) <= eps {
            return Err(PicsError::DegenerateKnots(i, j));
        }
    }
    Ok(())
}

/// Cubic coefficients of one segment, local offset form (see module docs).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicSegment<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    pub e: T,
    pub f: T,
    pub g: T,
    pub h: T,
}

impl<T: Scalar> CubicSegment<T> {
    pub fn point(&self, t: T) -> Point<T> {
        Point::new(
            ((self.a * t + self.b) * t + self.c) * t + self.d,
            ((self.e * t + self.f) * t + self.g) * t + self.h,
        )
    }

    pub fn first_derivative(&self, t: T) -> Point<T> {
        let three = T::lit(3.0);
        let two = T::lit(2.0);
        Point::new(
            (three * self.a * t + two * self.b) * t + self.c,
            (three * self.e * t + two * self.f) * t + self.g,
        )
    }

    pub fn second_derivative(&self, t: T) -> Point<T> {
        let six = T::lit(6.0);
        let two = T::lit(2.0);
        Point::new(six * self.a * t + two * self.b, six * self.e * t + two * self.f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSpline<T> {
    segments: Vec<CubicSegment<T>>,
}

impl<T: Scalar> PeriodicSpline<T> {
    pub fn fit(knots: &KnotVector<T>) -> Result<Self> {
        fit_periodic_spline(knots)
    }

    pub fn segments(&self) -> &[CubicSegment<T>] {
        &self.segments
    }

    pub fn n_knots(&self) -> usize {
        self.segments.len()
    }

    /// Width of one segment in parameter space, `1 / N`.
    pub fn spacing(&self) -> T {
        T::one() / T::from_count(self.segments.len())
    }

    /// Parameter of knot `k`.
    pub fn knot_parameter(&self, k: usize) -> T {
        T::from_count(k) / T::from_count(self.segments.len())
    }

    /// Segment index and local offset for `s` (wrapped into `[0, 1)`).
    pub fn locate(&self, s: T) -> (usize, T) {
        let n = self.segments.len();
        let nf = T::from_count(n);
        let scaled = wrap_unit(s) * nf;
        let i = scaled.floor().to_usize().unwrap_or(0).min(n - 1);
        let t = (scaled - T::from_count(i)) / nf;
        (i, t)
    }

    pub fn eval(&self, s: T) -> Point<T> {
        let (i, t) = self.locate(s);
        self.segments[i].point(t)
    }

    /// `(dpsi/ds, d2psi/ds2)` at `s`. At a join the segment starting there
    /// is used; continuity makes the choice immaterial.
    pub fn eval_derivatives(&self, s: T) -> (Point<T>, Point<T>) {
        let (i, t) = self.locate(s);
        let seg = &self.segments[i];
        (seg.first_derivative(t), seg.second_derivative(t))
    }

    /// Derivatives at every knot, read directly off the coefficients.
    pub fn knot_derivatives(&self) -> impl Iterator<Item = (Point<T>, Point<T>)> + '_ {
        let two = T::lit(2.0);
        self.segments
            .iter()
            .map(move |s| (Point::new(s.c, s.g), Point::new(two * s.b, two * s.f)))
    }

    /// Signed curvature at each knot, px^-1.
    pub fn curvature_at_knots(&self) -> Result<Vec<T>> {
        let threshold = T::lit(SINGULAR_SPEED);
        self.knot_derivatives()
            .enumerate()
            .map(|(k, (d1, d2))| {
                let speed_sq = d1.norm_sq();
                if speed_sq.sqrt() <= threshold {
                    return Err(PicsError::SingularTangent(k));
                }
                Ok((d2.y * d1.x - d2.x * d1.y) / (speed_sq * speed_sq.sqrt()))
            })
            .collect()
    }

    /// `N * samples_per_segment` points tracing the curve once, starting at
    /// knot 0. Every knot is included.
    pub fn sample_polygon(&self, samples_per_segment: usize) -> Vec<Point<T>> {
        let m = samples_per_segment.max(1);
        let step = self.spacing() / T::from_count(m);
        self.segments
            .iter()
            .flat_map(|seg| (0..m).map(move |j| seg.point(T::from_count(j) * step)))
            .collect()
    }
}

fn wrap_unit<T: Scalar>(s: T) -> T {
    let w = s - s.floor();
    // s slightly below an integer can round up to exactly 1.0
    if w >= T::one() {
        T::zero()
    } else {
        w
    }
}

pub fn fit_periodic_spline<T: Scalar>(knots: &KnotVector<T>) -> Result<PeriodicSpline<T>> {
    validate(knots.knots())?;
    let pts = knots.knots();
    let n = pts.len();
    let h = T::one() / T::from_count(n);
    let six = T::lit(6.0);

    let xs: Vec<T> = pts.iter().map(|p| p.x).collect();
    let ys: Vec<T> = pts.iter().map(|p| p.y).collect();
    let mx = second_derivatives(&xs, h);
    let my = second_derivatives(&ys, h);

    let segments = (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            let coeffs = |y: &[T], m: &[T]| {
                let a = (m[j] - m[i]) / (six * h);
                let b = m[i] / T::lit(2.0);
                let c = (y[j] - y[i]) / h - h * (T::lit(2.0) * m[i] + m[j]) / six;
                (a, b, c, y[i])
            };
            let (a, b, c, d) = coeffs(&xs, &mx);
            let (e, f, g, hh) = coeffs(&ys, &my);
            CubicSegment {
                a,
                b,
                c,
                d,
                e,
                f,
                g,
                h: hh,
            }
        })
        .collect();
    Ok(PeriodicSpline { segments })
}

/// Second derivatives at the knots of a uniform periodic cubic spline:
/// `M[i-1] + 4 M[i] + M[i+1] = 6 / h^2 (y[i+1] - 2 y[i] + y[i-1])`.
fn second_derivatives<T: Scalar>(y: &[T], h: T) -> Vec<T> {
    let n = y.len();
    let scale = T::lit(6.0) / (h * h);
    let rhs: Vec<T> = (0..n)
        .map(|i| {
            let prev = y[(i + n - 1) % n];
            let next = y[(i + 1) % n];
            scale * (next - T::lit(2.0) * y[i] + prev)
        })
        .collect();
    solve_cyclic(T::one(), T::lit(4.0), T::one(), &rhs)
}

/// Solve the cyclic tridiagonal system with constant sub-, main and
/// super-diagonal (`lo`, `diag`, `up`) and corner entries `up` (top right)
/// and `lo` (bottom left), via Sherman-Morrison on top of the Thomas sweep.
fn solve_cyclic<T: Scalar>(lo: T, diag: T, up: T, rhs: &[T]) -> Vec<T> {
    let n = rhs.len();
    debug_assert!(n >= 3);
    let corner_bl = lo;
    let corner_tr = up;
    let gamma = -diag;

    let mut main = vec![diag; n];
    main[0] = diag - gamma;
    main[n - 1] = diag - corner_bl * corner_tr / gamma;

    let x = thomas(lo, &main, up, rhs);
    let mut u = vec![T::zero(); n];
    u[0] = gamma;
    u[n - 1] = corner_bl;
    let z = thomas(lo, &main, up, &u);

    let fact = (x[0] + corner_tr * x[n - 1] / gamma) / (T::one() + z[0] + corner_tr * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(&xi, &zi)| xi - fact * zi).collect()
}

fn thomas<T: Scalar>(lo: T, main: &[T], up: T, rhs: &[T]) -> Vec<T> {
    let n = rhs.len();
    let mut c_prime = vec![T::zero(); n];
    let mut d_prime = vec![T::zero(); n];
    c_prime[0] = up / main[0];
    d_prime[0] = rhs[0] / main[0];
    for i in 1..n {
        let m = main[i] - lo * c_prime[i - 1];
        c_prime[i] = up / m;
        d_prime[i] = (rhs[i] - lo * d_prime[i - 1]) / m;
    }
    let mut x = vec![T::zero(); n];
    x[n - 1] = d_prime[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d_prime[i] - c_prime[i] * x[i + 1];
    }
    x
}
