//! Deterministic synthetic test images with known ground truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{PicsError, Result};
use crate::point::Point;
use crate::raster::{GrayImage, Mask};
use crate::scalar::Scalar;

pub const FIXTURE_NAMES: [&str; 4] = ["disk", "distorted-disk", "cavity", "translating-stack"];

/// Disk radius as a fraction of the image size.
pub const DISK_RADIUS_FRAC: f64 = 0.3;
/// Bite depth as a fraction of the disk radius.
pub const BITE_DEPTH_FRAC: f64 = 0.35;
/// Angular width of the bite, degrees.
pub const BITE_ARC_DEG: f64 = 90.0;
/// Foreground/background intensity gap of the distorted disk.
pub const DISTORTED_CONTRAST: f64 = 0.05;
/// Slices in the translating stack.
pub const STACK_SLICES: usize = 5;
/// Per-slice shift of the translating disk, px.
pub const STACK_SHIFT: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixtureSpec {
    pub size: usize,
    /// Standard deviation of additive Gaussian noise (intensity units).
    pub noise: f64,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            size: 128,
            noise: 0.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Fixture<T> {
    pub name: String,
    pub images: Vec<GrayImage<T>>,
    /// Ground-truth masks, one per image.
    pub truths: Vec<Mask>,
    /// A point inside the object on the first image.
    pub click: Point<T>,
}

/// Inside test for a pixel center.
type Shape = Box<dyn Fn(f64, f64) -> bool>;

pub fn make_fixture<T: Scalar>(name: &str, spec: FixtureSpec) -> Result<Fixture<T>> {
    if spec.size < 16 {
        return Err(PicsError::ImageTooSmall {
            width: spec.size,
            height: spec.size,
        });
    }
    let s = spec.size as f64;
    let c = s / 2.0;
    let r = DISK_RADIUS_FRAC * s;
    let (shapes, click): (Vec<Shape>, (f64, f64)) = match name {
        "disk" => (vec![Box::new(move |x, y| in_disk(x, y, c, c, r))], (c, c)),
        "distorted-disk" => (vec![Box::new(move |x, y| in_bitten_disk(x, y, c, r))], (c, c)),
        "cavity" => {
            let u = cavity_shape(s);
            (vec![Box::new(move |x, y| u.contains(x, y))], u.click())
        }
        "translating-stack" => {
            let r = 0.25 * s;
            let x0 = c - STACK_SHIFT * (STACK_SLICES as f64 - 1.0) / 2.0;
            let shapes = (0..STACK_SLICES)
                .map(|i| {
                    let cx = x0 + STACK_SHIFT * i as f64;
                    Box::new(move |x, y| in_disk(x, y, cx, c, r)) as Shape
                })
                .collect();
            (shapes, (x0, c))
        }
        other => return Err(PicsError::UnknownFixture(other.to_string())),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, spec.noise.max(0.0)).map_err(|e| PicsError::InvalidHyperparameter(e.to_string()))?;
    let n = spec.size;
    let bitten = name == "distorted-disk";
    let mut images = Vec::with_capacity(shapes.len());
    let mut truths = Vec::with_capacity(shapes.len());
    for shape in &shapes {
        let mut data = Vec::with_capacity(n * n);
        for y in 0..n {
            for x in 0..n {
                let inside = shape(x as f64 + 0.5, y as f64 + 0.5);
                let base = match (inside, bitten) {
                    (true, true) => 0.5 + DISTORTED_CONTRAST / 2.0,
                    (false, true) => 0.5 - DISTORTED_CONTRAST / 2.0,
                    (true, false) => 1.0,
                    (false, false) => 0.0,
                };
                let v = if spec.noise > 0.0 {
                    base + normal.sample(&mut rng)
                } else {
                    base
                };
                data.push(T::lit(v.clamp(0.0, 1.0)));
            }
        }
        images.push(GrayImage::new(n, n, data)?);
        // The bitten disk is scored against the intact disk it was cut from.
        let truth = if bitten {
            Mask::from_fn(n, n, |x, y| in_disk(x as f64 + 0.5, y as f64 + 0.5, c, c, r))
        } else {
            Mask::from_fn(n, n, |x, y| shape(x as f64 + 0.5, y as f64 + 0.5))
        };
        truths.push(truth);
    }
    Ok(Fixture {
        name: name.to_string(),
        images,
        truths,
        click: Point::new(T::lit(click.0), T::lit(click.1)),
    })
}

fn in_disk(x: f64, y: f64, cx: f64, cy: f64, r: f64) -> bool {
    let (dx, dy) = (x - cx, y - cy);
    dx * dx + dy * dy <= r * r
}

/// Disk with a half-sine bite removed from its boundary, centered on the
/// +x axis.
fn in_bitten_disk(x: f64, y: f64, c: f64, r: f64) -> bool {
    let (dx, dy) = (x - c, y - c);
    let rho = (dx * dx + dy * dy).sqrt();
    let arc = BITE_ARC_DEG.to_radians();
    let theta = dy.atan2(dx);
    let start = -arc / 2.0;
    let edge = if theta >= start && theta <= start + arc {
        r - BITE_DEPTH_FRAC * r * (std::f64::consts::PI * (theta - start) / arc).sin()
    } else {
        r
    };
    rho <= edge
}

/// Upright U: a square block with a slot cut down from its top edge.
#[derive(Clone, Copy, Debug)]
struct Cavity {
    outer: (f64, f64, f64, f64),
    slot: (f64, f64, f64, f64),
}

fn cavity_shape(s: f64) -> Cavity {
    Cavity {
        outer: (0.25 * s, 0.25 * s, 0.75 * s, 0.75 * s),
        slot: (0.40 * s, 0.25 * s, 0.60 * s, 0.55 * s),
    }
}

impl Cavity {
    fn contains(&self, x: f64, y: f64) -> bool {
        let within = |b: (f64, f64, f64, f64)| x >= b.0 && x < b.2 && y >= b.1 && y < b.3;
        within(self.outer) && !within(self.slot)
    }

    /// Middle of the bottom bar.
    fn click(&self) -> (f64, f64) {
        ((self.outer.0 + self.outer.2) / 2.0, (self.slot.3 + self.outer.3) / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn disk_area_matches() {
        let f: Fixture<f64> = make_fixture("disk", FixtureSpec::default()).unwrap();
        let r = DISK_RADIUS_FRAC * 128.0;
        assert!((f.truths[0].count() as f64 - PI * r * r).abs() <= 10.0);
        assert!(f.images[0].pixels().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn deterministic_with_seed() {
        let spec = FixtureSpec {
            noise: 0.1,
            seed: 7,
            ..Default::default()
        };
        let a: Fixture<f64> = make_fixture("cavity", spec).unwrap();
        let b: Fixture<f64> = make_fixture("cavity", spec).unwrap();
        assert_eq!(a.images, b.images);
        let c: Fixture<f64> = make_fixture("cavity", FixtureSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.images, c.images);
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(
            make_fixture::<f64>("torus", FixtureSpec::default()),
            Err(PicsError::UnknownFixture(_))
        ));
    }

    #[test]
    fn bite_removes_pixels_from_truth() {
        let f: Fixture<f64> = make_fixture("distorted-disk", FixtureSpec::default()).unwrap();
        let object = f.images[0].pixels().iter().filter(|&&v| v > 0.5).count();
        assert!(object < f.truths[0].count());
        let hi = 0.5 + DISTORTED_CONTRAST / 2.0;
        assert!(f.images[0].pixels().iter().all(|&v| v == hi || v == 1.0 - hi));
        assert!(f.truths[0].count() - object > 300);
    }

    #[test]
    fn stack_translates() {
        let f: Fixture<f64> = make_fixture("translating-stack", FixtureSpec::default()).unwrap();
        assert_eq!(f.images.len(), STACK_SLICES);
        let centroid_x = |m: &Mask| {
            let (mut sx, mut n) = (0.0, 0.0);
            for y in 0..m.height() {
                for x in 0..m.width() {
                    if m.get(x, y) {
                        sx += x as f64;
                        n += 1.0;
                    }
                }
            }
            sx / n
        };
        for w in f.truths.windows(2) {
            assert!((centroid_x(&w[1]) - centroid_x(&w[0]) - STACK_SHIFT).abs() < 0.5);
        }
    }

    #[test]
    fn cavity_click_inside() {
        let f: Fixture<f64> = make_fixture("cavity", FixtureSpec::default()).unwrap();
        let (x, y) = (f.click.x as usize, f.click.y as usize);
        assert!(f.truths[0].get(x, y));
        // slot center is background
        assert!(!f.truths[0].get(64, 50));
    }
}
