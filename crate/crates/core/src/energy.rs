//! Loss terms: spline smoothness, the region (Chan-Vese) energy and the
//! curvature-based shape prior, plus the hyperparameters that weight them.

use serde::{Deserialize, Serialize};

use crate::error::{PicsError, Result};
use crate::raster::{check_shape, image_gradient, rasterize_mask, region_means, GradField, GrayImage, Mask};
use crate::scalar::Scalar;
use crate::spline::{KnotVector, PeriodicSpline};

/// Orientation of the windowed energy differences fed to the OPI.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaOrientation {
    /// `J(i) - J(i-1)`: positive when the energy rises.
    #[default]
    Forward,
    /// `J(i-1) - J(i)`: positive when the energy drops.
    Drop,
}

/// Loss weights and optimizer settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    default,
    bound(serialize = "T: Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct Hyperparameters<T> {
    /// Weight of the mean squared first derivative.
    pub alpha: T,
    /// Weight of the mean squared second derivative.
    pub beta: T,
    /// Region energy weight; grows under OPI-driven adaptation.
    pub mu: T,
    /// Weight of the interior gradient term inside the region energy.
    pub gamma: T,
    /// Shape prior weight.
    pub sigma: T,
    pub learning_rate: T,
    pub adam_beta1: T,
    pub adam_beta2: T,
    pub adam_eps: T,
    pub max_iters: usize,
    /// Central-difference probe step, px.
    pub fd_step: T,
    pub opi_window: usize,
    pub opi_threshold: T,
    pub opi_delta: DeltaOrientation,
    /// Apply the OPI-triggered mu update.
    pub adaptive_mu: bool,
    /// mu stops adapting once `J_ext >= mu_cap_ratio * J_int`.
    pub mu_cap_ratio: T,
    pub samples_per_segment: usize,
    pub init_radius: T,
    pub n_knots: usize,
    /// Displacement (px) under which an iteration counts as stalled.
    pub stall_tolerance: T,
    /// Consecutive stalled iterations that end the run.
    pub stall_iters: usize,
    /// Iterations without relative improvement of the best total loss
    /// beyond `plateau_rel_tol` that end the run; 0 disables the rule.
    pub plateau_iters: usize,
    pub plateau_rel_tol: T,
    /// Keep a knot snapshot every this many iterations (0: never).
    pub snapshot_every: usize,
}

impl<T: Scalar> Default for Hyperparameters<T> {
    fn default() -> Self {
        let l = T::lit;
        Self {
            alpha: l(5e-1),
            beta: l(1e-2),
            mu: l(1e3),
            gamma: T::zero(),
            sigma: T::zero(),
            learning_rate: l(0.5),
            adam_beta1: l(0.9),
            adam_beta2: l(0.999),
            adam_eps: l(1e-8),
            max_iters: 500,
            fd_step: T::one(),
            opi_window: 10,
            opi_threshold: l(0.8),
            opi_delta: DeltaOrientation::Forward,
            adaptive_mu: true,
            mu_cap_ratio: l(1e4),
            samples_per_segment: 16,
            init_radius: l(5.0),
            n_knots: 10,
            stall_tolerance: l(1e-3),
            stall_iters: 20,
            plateau_iters: 40,
            plateau_rel_tol: l(1e-3),
            snapshot_every: 0,
        }
    }
}

impl<T: Scalar> Hyperparameters<T> {
    /// Defaults with the five loss weights replaced.
    pub fn with_weights(alpha: T, beta: T, mu: T, gamma: T, sigma: T) -> Self {
        Self {
            alpha,
            beta,
            mu,
            gamma,
            sigma,
            ..Self::default()
        }
    }

    /// `(alpha, beta, mu, gamma, sigma)`.
    pub fn weights(&self) -> [T; 5] {
        [self.alpha, self.beta, self.mu, self.gamma, self.sigma]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(PicsError::InvalidHyperparameter(msg.to_string()));
        let names = ["alpha", "beta", "mu", "gamma", "sigma"];
        for (name, w) in names.iter().zip(self.weights()) {
            if !(w >= T::zero()) || !w.is_finite() {
                return bad(&format!("{name} must be finite and >= 0, got {w}"));
            }
        }
        if !(self.learning_rate > T::zero()) {
            return bad("learning_rate must be > 0");
        }
        if !(self.fd_step > T::zero()) {
            return bad("fd_step must be > 0");
        }
        if self.opi_window < 2 {
            return bad("opi_window must be >= 2");
        }
        if !(self.mu_cap_ratio > T::one()) {
            return bad("mu_cap_ratio must be > 1");
        }
        if !(self.adam_beta1 >= T::zero() && self.adam_beta1 < T::one())
            || !(self.adam_beta2 >= T::zero() && self.adam_beta2 < T::one())
        {
            return bad("Adam moment decay rates must lie in [0, 1)");
        }
        if !(self.adam_eps > T::zero()) {
            return bad("adam_eps must be > 0");
        }
        if self.samples_per_segment < 2 {
            return bad("samples_per_segment must be >= 2");
        }
        if self.n_knots < crate::spline::MIN_KNOTS {
            return bad("n_knots must be >= 4");
        }
        if !(self.init_radius > T::zero()) {
            return bad("init_radius must be > 0");
        }
        Ok(())
    }
}

/// One loss evaluation. Raw terms are unweighted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown<T> {
    pub j_psi_s: T,
    pub j_psi_ss: T,
    pub j_cv: T,
    pub curv_penalty: T,
    pub j_int: T,
    pub j_ext: T,
    pub j_shape: T,
    pub j_total: T,
}

impl<T: Scalar> LossBreakdown<T> {
    /// Weighted recombination of raw terms.
    pub fn assemble(j_psi_s: T, j_psi_ss: T, j_cv: T, curv_penalty: T, hyper: &Hyperparameters<T>) -> Self {
        let j_int = hyper.alpha * j_psi_s + hyper.beta * j_psi_ss;
        let j_ext = hyper.mu * j_cv;
        let j_shape = hyper.sigma * curv_penalty;
        Self {
            j_psi_s,
            j_psi_ss,
            j_cv,
            curv_penalty,
            j_int,
            j_ext,
            j_shape,
            j_total: j_int + j_ext + j_shape,
        }
    }
}

/// Image plus its precomputed gradient field; shared by every loss probe.
#[derive(Clone, Debug)]
pub struct LossContext<T> {
    image: GrayImage<T>,
    grad: GradField<T>,
}

impl<T: Scalar> LossContext<T> {
    pub fn new(image: GrayImage<T>) -> Self {
        let grad = image_gradient(&image);
        Self { image, grad }
    }

    pub fn image(&self) -> &GrayImage<T> {
        &self.image
    }

    pub fn grad(&self) -> &GradField<T> {
        &self.grad
    }

    pub fn mask_for(&self, knots: &KnotVector<T>, samples_per_segment: usize) -> Result<Mask> {
        let spline = PeriodicSpline::fit(knots)?;
        let poly = spline.sample_polygon(samples_per_segment);
        Ok(rasterize_mask(&poly, self.image.width(), self.image.height()))
    }

    pub fn loss(&self, knots: &KnotVector<T>, hyper: &Hyperparameters<T>) -> Result<LossBreakdown<T>> {
        total_loss(&self.image, &self.grad, knots, hyper)
    }
}

/// `(J_psi_s, J_psi_ss)`: mean squared first and second derivative
/// magnitudes over the knot parameters.
pub fn internal_energy<T: Scalar>(spline: &PeriodicSpline<T>) -> (T, T) {
    let n = T::from_count(spline.n_knots());
    let (s, ss) = spline
        .knot_derivatives()
        .fold((T::zero(), T::zero()), |(s, ss), (d1, d2)| {
            (s + d1.norm_sq(), ss + d2.norm_sq())
        });
    (s / n, ss / n)
}

/// Region energy with both means recomputed from `mask`:
/// `sum ((I - m_in) chi)^2 + gamma |grad I|^2 chi + ((I - m_out)(1 - chi))^2`.
pub fn chan_vese_energy<T: Scalar>(image: &GrayImage<T>, grad: &GradField<T>, mask: &Mask, gamma: T) -> Result<T> {
    check_shape(image.width(), image.height(), mask)?;
    if grad.width() != image.width() || grad.height() != image.height() {
        return Err(PicsError::DimensionMismatch("gradient field vs image".into()));
    }
    let stats = region_means(image, mask)?;
    let mut acc = T::zero();
    for ((&v, &g), &inside) in image.pixels().iter().zip(grad.values()).zip(mask.cells()) {
        if inside {
            let r = v - stats.mean_in;
            acc = acc + r * r + gamma * g;
        } else {
            let r = v - stats.mean_out;
            acc = acc + r * r;
        }
    }
    Ok(acc)
}

/// Mean squared curvature over the knots.
pub fn shape_penalty<T: Scalar>(spline: &PeriodicSpline<T>) -> Result<T> {
    let kappa = spline.curvature_at_knots()?;
    let n = T::from_count(kappa.len());
    Ok(kappa.iter().map(|&k| k * k).sum::<T>() / n)
}

/// Fit, sample, rasterize and evaluate every term.
pub fn total_loss<T: Scalar>(
    image: &GrayImage<T>,
    grad: &GradField<T>,
    knots: &KnotVector<T>,
    hyper: &Hyperparameters<T>,
) -> Result<LossBreakdown<T>> {
    let spline = PeriodicSpline::fit(knots)?;
    let (j_s, j_ss) = internal_energy(&spline);
    let curv = shape_penalty(&spline)?;
    let poly = spline.sample_polygon(hyper.samples_per_segment);
    let mask = rasterize_mask(&poly, image.width(), image.height());
    let j_cv = chan_vese_energy(image, grad, &mask, hyper.gamma)?;
    Ok(LossBreakdown::assemble(j_s, j_ss, j_cv, curv, hyper))
}
