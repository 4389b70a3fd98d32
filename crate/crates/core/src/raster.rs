//! Pixel-grid fields: images, masks and squared gradient magnitudes.

use serde::{Deserialize, Serialize};

use crate::error::{PicsError, Result};
use crate::point::Point;
use crate::scalar::Scalar;

/// Grayscale image with intensities in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrayImage<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> GrayImage<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width < 4 || height < 4 {
            return Err(PicsError::ImageTooSmall { width, height });
        }
        if data.len() != width * height {
            return Err(PicsError::DimensionMismatch(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !(*v >= T::zero() && *v <= T::one())) {
            return Err(PicsError::IntensityOutOfRange {
                x: i % width,
                y: i / width,
                value: data[i].to_f64_lossy(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> T) -> Result<Self> {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, data)
    }

    pub fn uniform(width: usize, height: usize, value: T) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn pixels(&self) -> &[T] {
        &self.data
    }

    /// Whether `p` lies inside the closed image rectangle `[0, W] x [0, H]`.
    pub fn contains(&self, p: Point<T>) -> bool {
        p.x >= T::zero() && p.y >= T::zero() && p.x <= T::from_count(self.width) && p.y <= T::from_count(self.height)
    }
}

/// Binary occupancy per pixel (the characteristic function).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(PicsError::DimensionMismatch(format!(
                "{}x{} mask needs {} cells, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn cells(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn same_shape(&self, other: &Mask) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Squared gradient magnitude `|grad I|^2` per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct GradField<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> GradField<T> {
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

/// Even-odd fill of a closed polyline, sampled at pixel centers.
///
/// Pixel `(p, q)` is inside iff a ray from `(p + 0.5, q + 0.5)` towards +x
/// crosses the polygon boundary an odd number of times. The crossing test
/// is the classic half-open one, so horizontal edges and vertices landing
/// exactly on a scanline are counted consistently.
pub fn rasterize_mask<T: Scalar>(polygon: &[Point<T>], width: usize, height: usize) -> Mask {
    let mut mask = Mask::empty(width, height);
    let n = polygon.len();
    if n < 3 || width == 0 || height == 0 {
        return mask;
    }
    let half = T::lit(0.5);
    let mut crossings: Vec<T> = Vec::with_capacity(n);

    let (ymin, ymax) = polygon.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), p| {
        (lo.min(p.y), hi.max(p.y))
    });
    let first_row = (ymin - half).floor().max(T::zero()).to_usize().unwrap_or(0);
    let last_row = (ymax - half)
        .ceil()
        .max(T::zero())
        .to_usize()
        .unwrap_or(0)
        .min(height - 1);
    if ymax < T::zero() || first_row >= height {
        return mask;
    }

    for q in first_row..=last_row {
        let y = T::from_count(q) + half;
        crossings.clear();
        let mut j = n - 1;
        for i in 0..n {
            let (pi, pj) = (polygon[i], polygon[j]);
            if (pi.y > y) != (pj.y > y) {
                crossings.push(edge_crossing_x(pi, pj, y));
            }
            j = i;
        }
        if crossings.is_empty() {
            continue;
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).expect("finite crossings"));
        let row = q * width;
        // inside iff an odd number of crossings lie strictly right of the center
        for p in 0..width {
            let x = T::from_count(p) + half;
            let at_or_left = crossings.partition_point(|&c| c <= x);
            if (crossings.len() - at_or_left) % 2 == 1 {
                mask.data[row + p] = true;
            }
        }
    }
    mask
}

/// x where edge `a -> b` meets the horizontal line at `y`; same expression
/// as the per-point ray-casting test.
#[inline]
pub fn edge_crossing_x<T: Scalar>(a: Point<T>, b: Point<T>, y: T) -> T {
    (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x
}

/// `|grad I|^2` with central differences inside, one-sided at the border.
pub fn image_gradient<T: Scalar>(image: &GrayImage<T>) -> GradField<T> {
    let (w, h) = (image.width(), image.height());
    let half = T::lit(0.5);
    let diff = |lo: usize, hi: usize, a: T, b: T| if hi - lo == 2 { (b - a) * half } else { b - a };
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (y0, y1) = (y.saturating_sub(1), (y + 1).min(h - 1));
            let gx = diff(x0, x1, image.get(x0, y), image.get(x1, y));
            let gy = diff(y0, y1, image.get(x, y0), image.get(x, y1));
            data.push(gx * gx + gy * gy);
        }
    }
    GradField {
        width: w,
        height: h,
        data,
    }
}

/// Means and pixel counts inside (`mask == true`) and outside the mask.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionStats<T> {
    pub mean_in: T,
    pub mean_out: T,
    pub n_in: usize,
    pub n_out: usize,
}

/// Empty regions report mean 0 and count 0.
pub fn region_means<T: Scalar>(image: &GrayImage<T>, mask: &Mask) -> Result<RegionStats<T>> {
    check_shape(image.width(), image.height(), mask)?;
    let (mut sum_in, mut sum_out) = (T::zero(), T::zero());
    let mut n_in = 0usize;
    for (&v, &inside) in image.pixels().iter().zip(mask.cells()) {
        if inside {
            sum_in = sum_in + v;
            n_in += 1;
        } else {
            sum_out = sum_out + v;
        }
    }
    let n_out = mask.cells().len() - n_in;
    let mean = |s: T, n: usize| if n == 0 { T::zero() } else { s / T::from_count(n) };
    Ok(RegionStats {
        mean_in: mean(sum_in, n_in),
        mean_out: mean(sum_out, n_out),
        n_in,
        n_out,
    })
}

pub(crate) fn check_shape(width: usize, height: usize, mask: &Mask) -> Result<()> {
    if mask.width() != width || mask.height() != height {
        return Err(PicsError::DimensionMismatch(format!(
            "mask {}x{} vs image {}x{}",
            mask.width(),
            mask.height(),
            width,
            height
        )));
    }
    Ok(())
}
