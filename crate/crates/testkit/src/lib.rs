//! Slow, obviously-correct reference implementations used to check the
//! engine. Nothing here shares code with `pics-core` beyond plain data types.

use pics_core::{KnotVector64, Point64};
use rand::Rng;

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let p = a[col][col];
        assert!(p.abs() > 1e-300, "singular system");
        for row in col + 1..n {
            let f = a[row][col] / p;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Per-segment `[a, b, c, d]` of a uniform periodic cubic through `y` on
/// parameter spacing `1/N`, in local offset form, from one 4N x 4N solve of
/// the interpolation and C1/C2 join conditions.
pub fn dense_periodic_cubic(y: &[f64]) -> Vec<[f64; 4]> {
    let n = y.len();
    let h = 1.0 / n as f64;
    let m = 4 * n;
    let mut a = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    let idx = |seg: usize, k: usize| 4 * seg + k;
    for i in 0..n {
        let j = (i + 1) % n;
        let r = 4 * i;
        // left end
        a[r][idx(i, 3)] = 1.0;
        rhs[r] = y[i];
        // right end
        a[r + 1][idx(i, 0)] = h * h * h;
        a[r + 1][idx(i, 1)] = h * h;
        a[r + 1][idx(i, 2)] = h;
        a[r + 1][idx(i, 3)] = 1.0;
        rhs[r + 1] = y[j];
        // slope join
        a[r + 2][idx(i, 0)] = 3.0 * h * h;
        a[r + 2][idx(i, 1)] = 2.0 * h;
        a[r + 2][idx(i, 2)] = 1.0;
        a[r + 2][idx(j, 2)] = -1.0;
        // curvature join
        a[r + 3][idx(i, 0)] = 6.0 * h;
        a[r + 3][idx(i, 1)] = 2.0;
        a[r + 3][idx(j, 1)] = -2.0;
    }
    let x = solve_dense(a, rhs);
    (0..n)
        .map(|i| [x[4 * i], x[4 * i + 1], x[4 * i + 2], x[4 * i + 3]])
        .collect()
}

/// Evaluate a local-form cubic and its first two derivatives at offset `t`.
pub fn eval_cubic(c: [f64; 4], t: f64) -> (f64, f64, f64) {
    let [a, b, cc, d] = c;
    (
        ((a * t + b) * t + cc) * t + d,
        (3.0 * a * t + 2.0 * b) * t + cc,
        6.0 * a * t + 2.0 * b,
    )
}

/// Classic PNPOLY even-odd test.
pub fn pnpoly(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Row-major mask from testing every pixel center with [`pnpoly`].
pub fn pnpoly_mask(poly: &[(f64, f64)], width: usize, height: usize) -> Vec<bool> {
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            out.push(pnpoly(poly, x as f64 + 0.5, y as f64 + 0.5));
        }
    }
    out
}

/// Squared gradient magnitude, central differences inside and one-sided
/// differences on the border.
pub fn grad_mag_sq(img: &[f64], width: usize, height: usize) -> Vec<f64> {
    let at = |x: usize, y: usize| img[y * width + x];
    let diff = |lo: f64, hi: f64, span: f64| (hi - lo) / span;
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let gx = match x {
                0 => diff(at(0, y), at(1, y), 1.0),
                _ if x == width - 1 => diff(at(x - 1, y), at(x, y), 1.0),
                _ => diff(at(x - 1, y), at(x + 1, y), 2.0),
            };
            let gy = match y {
                0 => diff(at(x, 0), at(x, 1), 1.0),
                _ if y == height - 1 => diff(at(x, y - 1), at(x, y), 1.0),
                _ => diff(at(x, y - 1), at(x, y + 1), 2.0),
            };
            out.push(gx * gx + gy * gy);
        }
    }
    out
}

/// Region energy by direct summation over every pixel.
pub fn brute_chan_vese(img: &[f64], width: usize, height: usize, mask: &[bool], gamma: f64) -> f64 {
    let (mut s_in, mut n_in, mut s_out, mut n_out) = (0.0, 0usize, 0.0, 0usize);
    for (v, &m) in img.iter().zip(mask) {
        if m {
            s_in += v;
            n_in += 1;
        } else {
            s_out += v;
            n_out += 1;
        }
    }
    let mean_in = if n_in > 0 { s_in / n_in as f64 } else { 0.0 };
    let mean_out = if n_out > 0 { s_out / n_out as f64 } else { 0.0 };
    let g = grad_mag_sq(img, width, height);
    let mut total = 0.0;
    for k in 0..img.len() {
        let chi = if mask[k] { 1.0 } else { 0.0 };
        total +=
            ((img[k] - mean_in) * chi).powi(2) + gamma * g[k] * chi * chi + ((img[k] - mean_out) * (1.0 - chi)).powi(2);
    }
    total
}

/// Linear maps from knot ordinates to spline first and second derivatives at
/// the knots, built column by column from [`dense_periodic_cubic`].
pub fn derivative_maps(n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut d1 = vec![vec![0.0; n]; n];
    let mut d2 = vec![vec![0.0; n]; n];
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        for (row, seg) in dense_periodic_cubic(&e).into_iter().enumerate() {
            d1[row][col] = seg[2];
            d2[row][col] = 2.0 * seg[1];
        }
    }
    (d1, d2)
}

/// Gradient of `alpha J_psi_s + beta J_psi_ss` with respect to the
/// interleaved knot coordinates `[u0, v0, u1, v1, ...]`.
pub fn analytic_internal_gradient(knots: &[(f64, f64)], alpha: f64, beta: f64) -> Vec<f64> {
    let n = knots.len();
    let (d1, d2) = derivative_maps(n);
    let u: Vec<f64> = knots.iter().map(|k| k.0).collect();
    let v: Vec<f64> = knots.iter().map(|k| k.1).collect();
    // d/dy of (1/N)|D y|^2 = (2/N) D^T D y
    let grad_of = |d: &Vec<Vec<f64>>, y: &[f64]| -> Vec<f64> {
        let dy: Vec<f64> = d
            .iter()
            .map(|row| row.iter().zip(y).map(|(a, b)| a * b).sum())
            .collect();
        (0..n)
            .map(|j| 2.0 / n as f64 * (0..n).map(|i| d[i][j] * dy[i]).sum::<f64>())
            .collect()
    };
    let (gu1, gv1, gu2, gv2) = (grad_of(&d1, &u), grad_of(&d1, &v), grad_of(&d2, &u), grad_of(&d2, &v));
    let mut out = Vec::with_capacity(2 * n);
    for k in 0..n {
        out.push(alpha * gu1[k] + beta * gu2[k]);
        out.push(alpha * gv1[k] + beta * gv2[k]);
    }
    out
}

/// Star-shaped random knot set: sorted jittered angles, radii in
/// `[0.4, 1] * max_radius` around `center`.
pub fn random_star(rng: &mut impl Rng, n: usize, center: (f64, f64), max_radius: f64) -> Vec<(f64, f64)> {
    let step = std::f64::consts::TAU / n as f64;
    (0..n)
        .map(|k| {
            let theta = step * (k as f64 + rng.random_range(-0.3..0.3));
            let r = max_radius * rng.random_range(0.4..1.0);
            (center.0 + r * theta.cos(), center.1 + r * theta.sin())
        })
        .collect()
}

/// Arbitrary (possibly self-intersecting) polygon with vertices inside the
/// `width x height` box.
pub fn random_polygon(rng: &mut impl Rng, n: usize, width: f64, height: f64) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| (rng.random_range(0.0..width), rng.random_range(0.0..height)))
        .collect()
}

pub fn to_points(pts: &[(f64, f64)]) -> Vec<Point64> {
    pts.iter().map(|&(x, y)| Point64::new(x, y)).collect()
}

pub fn to_knots(pts: &[(f64, f64)]) -> KnotVector64 {
    KnotVector64::new(to_points(pts)).expect("valid knot set")
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solver_inverts_small_system() {
        let x = solve_dense(vec![vec![0.0, 2.0], vec![3.0, 1.0]], vec![4.0, 5.0]);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn constant_data_gives_flat_cubic() {
        for seg in dense_periodic_cubic(&[3.0; 6]) {
            assert!(seg[0].abs() < 1e-9 && seg[1].abs() < 1e-9 && seg[2].abs() < 1e-9);
            assert!((seg[3] - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pnpoly_unit_square() {
        let sq = [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)];
        assert!(pnpoly(&sq, 1.0, 1.0));
        assert!(!pnpoly(&sq, 3.0, 1.0));
    }

    #[test]
    fn brute_cv_uniform_is_zero() {
        let img = vec![0.4; 16];
        let mask: Vec<bool> = (0..16).map(|k| k % 3 == 0).collect();
        assert!(brute_chan_vese(&img, 4, 4, &mask, 0.0).abs() < 1e-15);
    }
}
