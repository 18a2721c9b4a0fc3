//! Proprioceptive signal reduction: PCA projection to a 2D point, the
//! traversability norm, and gait-terrain confidence ellipses.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Gait, TerrainClass};

pub const JOINTS: usize = 12;
/// 12 joint positions, 12 joint velocities, 12 joint forces, battery current.
pub const SIGNAL_DIM: usize = 3 * JOINTS + 1;

/// Default probability mass enclosed by a gait-terrain ellipse.
pub const DEFAULT_CONFIDENCE: f64 = 0.95;

/// One raw proprioceptive reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSignal(pub Vec<f64>);

impl RawSignal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != SIGNAL_DIM {
            return Err(Error::DimensionMismatch(format!(
                "raw signal has {} entries, expected {SIGNAL_DIM}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("raw signal has non-finite entries".into()));
        }
        Ok(Self(values))
    }

    pub fn joint_positions(&self) -> &[f64] {
        &self.0[..JOINTS]
    }

    pub fn joint_velocities(&self) -> &[f64] {
        &self.0[JOINTS..2 * JOINTS]
    }

    pub fn joint_forces(&self) -> &[f64] {
        &self.0[2 * JOINTS..3 * JOINTS]
    }

    pub fn battery_current(&self) -> f64 {
        self.0[3 * JOINTS]
    }
}

/// Top-two principal directions of a set of raw signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Two orthonormal rows of length `mean.len()`.
    pub components: [Vec<f64>; 2],
    /// Variances along each component, descending.
    pub eigenvalues: [f64; 2],
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `p = components * (s - mean)`.
    pub fn project(&self, s: &RawSignal) -> Result<[f64; 2]> {
        self.project_slice(&s.0)
    }

    pub fn project_slice(&self, s: &[f64]) -> Result<[f64; 2]> {
        if s.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "signal has {} entries, model expects {}",
                s.len(),
                self.dim()
            )));
        }
        let mut p = [0.0; 2];
        for (k, comp) in self.components.iter().enumerate() {
            p[k] = comp.iter().zip(s.iter().zip(&self.mean)).map(|(c, (x, m))| c * (x - m)).sum();
        }
        Ok(p)
    }

    pub fn project_batch(&self, samples: &[RawSignal]) -> Result<Vec<[f64; 2]>> {
        samples.iter().map(|s| self.project(s)).collect()
    }

    /// `s = mean + components^T p`, the inverse on the principal plane.
    pub fn back_project(&self, p: [f64; 2]) -> Vec<f64> {
        self.mean
            .iter()
            .enumerate()
            .map(|(i, m)| m + self.components[0][i] * p[0] + self.components[1][i] * p[1])
            .collect()
    }
}

/// Flips `v` so its first entry with magnitude above `tol` is positive.
fn fix_sign(v: &mut [f64], tol: f64) {
    if let Some(first) = v.iter().find(|x| x.abs() > tol) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Fits a two-component PCA to raw proprioceptive samples.
pub fn fit_pca(samples: &[RawSignal]) -> Result<PcaModel> {
    if samples.len() < 3 {
        return Err(Error::InvalidInput(format!("PCA needs at least 3 samples, got {}", samples.len())));
    }
    let dim = samples[0].0.len();
    if samples.iter().any(|s| s.0.len() != dim) {
        return Err(Error::DimensionMismatch("samples have differing lengths".into()));
    }
    let n = samples.len();
    let mut mean = vec![0.0; dim];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(&s.0) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, dim, |r, c| samples[r].0[c] - mean[c]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let l1 = eig.eigenvalues[order[0]];
    let l2 = eig.eigenvalues[order[1]];
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(l1 > 0.0) || l2 <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate(format!(
            "covariance has rank < 2 (leading eigenvalues {l1:.3e}, {l2:.3e})"
        )));
    }

    let mut components: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (k, &idx) in order.iter().take(2).enumerate() {
        let col: DVector<f64> = eig.eigenvectors.column(idx).into_owned();
        let mut v: Vec<f64> = col.iter().copied().collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        fix_sign(&mut v, 1e-12);
        components[k] = v;
    }
    Ok(PcaModel { mean, components, eigenvalues: [l1, l2] })
}

/// Traversability of a projected reading: its Euclidean norm.
pub fn traversability(p: [f64; 2]) -> f64 {
    p[0].hypot(p[1])
}

/// Chi-square quantile with two degrees of freedom.
pub fn chi2_quantile_2dof(confidence: f64) -> f64 {
    -2.0 * (1.0 - confidence).ln()
}

/// Confidence ellipse of the PCA points observed for one (terrain, gait) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitTerrainEllipse {
    pub terrain: TerrainClass,
    pub gait: Gait,
    pub center: [f64; 2],
    pub covariance: [[f64; 2]; 2],
    pub confidence: f64,
}

impl GaitTerrainEllipse {
    pub fn new(
        terrain: TerrainClass,
        gait: Gait,
        center: [f64; 2],
        covariance: [[f64; 2]; 2],
        confidence: f64,
    ) -> Result<Self> {
        let e = Self { terrain, gait, center, covariance, confidence };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.terrain.is_terrain() {
            return Err(Error::InvalidInput(format!("{} cannot carry an ellipse", self.terrain)));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidInput(format!("confidence {} outside (0, 1)", self.confidence)));
        }
        let c = &self.covariance;
        if (c[0][1] - c[1][0]).abs() > 1e-9 * (c[0][1].abs() + c[1][0].abs()).max(1.0) {
            return Err(Error::Degenerate("covariance is not symmetric".into()));
        }
        if !(c[0][0] > 0.0) || !(self.det() > 0.0) {
            return Err(Error::Degenerate("covariance is not positive definite".into()));
        }
        Ok(())
    }

    pub fn det(&self) -> f64 {
        let c = &self.covariance;
        c[0][0] * c[1][1] - c[0][1] * c[1][0]
    }

    pub fn chi2(&self) -> f64 {
        chi2_quantile_2dof(self.confidence)
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        let c = &self.covariance;
        Matrix2::new(c[0][0], c[0][1], c[1][0], c[1][1])
    }

    /// Squared Mahalanobis distance of `p` from the center.
    pub fn mahalanobis2(&self, p: [f64; 2]) -> f64 {
        let c = &self.covariance;
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        (c[1][1] * dx * dx - (c[0][1] + c[1][0]) * dx * dy + c[0][0] * dy * dy) / self.det()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.mahalanobis2(p) <= self.chi2()
    }

    /// Lower Cholesky factor of the covariance.
    pub fn cholesky(&self) -> [[f64; 2]; 2] {
        let c = &self.covariance;
        let l00 = c[0][0].sqrt();
        let l10 = c[1][0] / l00;
        let l11 = (c[1][1] - l10 * l10).max(0.0).sqrt();
        [[l00, 0.0], [l10, l11]]
    }

    /// Semi-axes and orientation of the boundary curve, for plotting.
    pub fn axes(&self) -> (f64, f64, f64) {
        let eig = SymmetricEigen::new(self.matrix());
        let (i_major, i_minor) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
        let k = self.chi2();
        let major = (k * eig.eigenvalues[i_major]).sqrt();
        let minor = (k * eig.eigenvalues[i_minor]).sqrt();
        let v: Vector2<f64> = eig.eigenvectors.column(i_major).into_owned();
        (major, minor, v[1].atan2(v[0]))
    }

    /// Root-mean-square norm of points drawn from this Gaussian.
    pub fn rms_norm(&self) -> f64 {
        let c = &self.covariance;
        (self.center[0].powi(2) + self.center[1].powi(2) + c[0][0] + c[1][1]).sqrt()
    }
}

/// Fits a confidence ellipse (sample mean and covariance) to 2D points.
pub fn fit_ellipse(
    terrain: TerrainClass,
    gait: Gait,
    points: &[[f64; 2]],
    confidence: f64,
) -> Result<GaitTerrainEllipse> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!("ellipse needs at least 3 points, got {}", points.len())));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let dx = p[0] - mx;
        let dy = p[1] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    sxx /= n - 1.0;
    sxy /= n - 1.0;
    syy /= n - 1.0;
    let det = sxx * syy - sxy * sxy;
    let trace = sxx + syy;
    if !(trace > 0.0) || det <= 1e-12 * trace * trace {
        return Err(Error::Degenerate(format!(
            "points for ({terrain}, {gait}) are collinear or coincident"
        )));
    }
    GaitTerrainEllipse::new(terrain, gait, [mx, my], [[sxx, sxy], [sxy, syy]], confidence)
}

/// `pi * chi2(confidence) * sqrt(det(covariance))`.
pub fn ellipse_area(e: &GaitTerrainEllipse) -> Result<f64> {
    e.validate()?;
    Ok(PI * e.chi2() * e.det().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn plane_samples(n: usize, rng: &mut ChaCha8Rng) -> (Vec<RawSignal>, Vec<f64>, Vec<f64>) {
        let mut u = vec![0.0; SIGNAL_DIM];
        let mut w = vec![0.0; SIGNAL_DIM];
        u[0] = 1.0;
        u[5] = 1.0;
        w[3] = 1.0;
        w[20] = -1.0;
        let nu = 2f64.sqrt();
        u.iter_mut().for_each(|x| *x /= nu);
        w.iter_mut().for_each(|x| *x /= nu);
        let base: Vec<f64> = (0..SIGNAL_DIM).map(|i| i as f64 * 0.1).collect();
        let samples = (0..n)
            .map(|_| {
                let a: f64 = rng.sample::<f64, _>(StandardNormal) * 3.0;
                let b: f64 = rng.sample(StandardNormal);
                RawSignal((0..SIGNAL_DIM).map(|i| base[i] + a * u[i] + b * w[i]).collect())
            })
            .collect();
        (samples, u, w)
    }

    #[test]
    fn planar_data_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (samples, _, _) = plane_samples(200, &mut rng);
        let model = fit_pca(&samples).unwrap();
        for s in &samples {
            let p = model.project(s).unwrap();
            let back = model.back_project(p);
            let resid = back.iter().zip(&s.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(resid <= 1e-9, "residual {resid}");
        }
    }

    #[test]
    fn components_are_orthonormal_and_sign_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (samples, _, _) = plane_samples(100, &mut rng);
        let m = fit_pca(&samples).unwrap();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        assert!((dot(&m.components[0], &m.components[0]) - 1.0).abs() < 1e-9);
        assert!((dot(&m.components[1], &m.components[1]) - 1.0).abs() < 1e-9);
        assert!(dot(&m.components[0], &m.components[1]).abs() < 1e-9);
        assert!(m.eigenvalues[0] >= m.eigenvalues[1]);
        for c in &m.components {
            let first = c.iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn duplicated_sample_is_degenerate() {
        let s = RawSignal(vec![1.0; SIGNAL_DIM]);
        let err = fit_pca(&[s.clone(), s.clone(), s]).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn collinear_samples_are_degenerate() {
        let samples: Vec<RawSignal> = (0..10)
            .map(|k| RawSignal((0..SIGNAL_DIM).map(|i| (i as f64) * k as f64).collect()))
            .collect();
        assert!(matches!(fit_pca(&samples), Err(Error::Degenerate(_))));
    }

    #[test]
    fn projection_of_mean_and_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (samples, _, _) = plane_samples(300, &mut rng);
        let m = fit_pca(&samples).unwrap();
        let p0 = m.project_slice(&m.mean).unwrap();
        assert!(p0[0].abs() < 1e-12 && p0[1].abs() < 1e-12);
        let shifted: Vec<f64> = m.mean.iter().zip(&m.components[0]).map(|(a, b)| a + b).collect();
        let p1 = m.project_slice(&shifted).unwrap();
        assert!((p1[0] - 1.0).abs() < 1e-12 && p1[1].abs() < 1e-12);
    }

    #[test]
    fn batch_projection_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (samples, _, _) = plane_samples(50, &mut rng);
        let m = fit_pca(&samples).unwrap();
        let batch = m.project_batch(&samples).unwrap();
        for (s, b) in samples.iter().zip(&batch) {
            // independent dot-product loop
            let mut p = [0.0; 2];
            for k in 0..2 {
                for i in 0..SIGNAL_DIM {
                    p[k] += m.components[k][i] * (s.0[i] - m.mean[i]);
                }
            }
            assert!((p[0] - b[0]).abs() < 1e-12 && (p[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn project_rejects_wrong_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (samples, _, _) = plane_samples(20, &mut rng);
        let m = fit_pca(&samples).unwrap();
        assert!(m.project_slice(&[0.0; 3]).is_err());
        assert!(RawSignal::new(vec![0.0; 5]).is_err());
    }

    #[test]
    fn norm_examples() {
        assert_eq!(traversability([0.0, 0.0]), 0.0);
        assert_eq!(traversability([3.0, 4.0]), 5.0);
    }

    #[test]
    fn mean_norm_grows_with_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut prev = 0.0;
        for scale in [0.5, 1.0, 2.0, 4.0] {
            let mean: f64 = (0..5000)
                .map(|_| {
                    let x: f64 = rng.sample(StandardNormal);
                    let y: f64 = rng.sample(StandardNormal);
                    traversability([scale * x, scale * y])
                })
                .sum::<f64>()
                / 5000.0;
            assert!(mean > prev);
            prev = mean;
        }
    }

    #[test]
    fn circle_moments() {
        let pts: Vec<[f64; 2]> = (0..360)
            .map(|k| {
                let a = (k as f64).to_radians();
                [a.cos(), a.sin()]
            })
            .collect();
        let e = fit_ellipse(TerrainClass::Stable, Gait::Trot, &pts, 0.95).unwrap();
        // analytic moments of the unit circle: E[cos^2] = 1/2, n/(n-1) correction
        let expected = 0.5 * 360.0 / 359.0;
        assert!(e.center[0].abs() < 1e-12 && e.center[1].abs() < 1e-12);
        assert!((e.covariance[0][0] - expected).abs() < 1e-9);
        assert!((e.covariance[1][1] - expected).abs() < 1e-9);
        assert!(e.covariance[0][1].abs() < 1e-9);
    }

    #[test]
    fn collinear_points_are_rejected() {
        let pts = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]];
        assert!(matches!(
            fit_ellipse(TerrainClass::Stable, Gait::Trot, &pts, 0.95),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn unit_circle_area_and_scaling() {
        let conf = 1.0 - (-0.5f64).exp();
        let e = GaitTerrainEllipse::new(TerrainClass::Stable, Gait::Trot, [0.0; 2], [[1.0, 0.0], [0.0, 1.0]], conf)
            .unwrap();
        assert!((e.chi2() - 1.0).abs() < 1e-12);
        assert!((ellipse_area(&e).unwrap() - PI).abs() < 1e-12);
        let mut doubled = e.clone();
        doubled.covariance = [[2.0, 0.0], [0.0, 2.0]];
        assert!((ellipse_area(&doubled).unwrap() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn non_spd_covariance_is_rejected() {
        let e = GaitTerrainEllipse {
            terrain: TerrainClass::Stable,
            gait: Gait::Trot,
            center: [0.0; 2],
            covariance: [[1.0, 2.0], [2.0, 1.0]],
            confidence: 0.95,
        };
        assert!(ellipse_area(&e).is_err());
        assert!(GaitTerrainEllipse::new(TerrainClass::Unknown, Gait::Trot, [0.0; 2], [[1.0, 0.0], [0.0, 1.0]], 0.95)
            .is_err());
    }

    #[test]
    fn chi2_at_95_percent() {
        assert!((chi2_quantile_2dof(0.95) - 5.991464547107979).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn area_is_rotation_invariant(angle in 0.0f64..6.3, sx in 0.1f64..3.0, sy in 0.1f64..3.0) {
            let (s, c) = angle.sin_cos();
            // R diag(sx^2, sy^2) R^T
            let a = c * c * sx * sx + s * s * sy * sy;
            let b = c * s * (sx * sx - sy * sy);
            let d = s * s * sx * sx + c * c * sy * sy;
            let e0 = GaitTerrainEllipse::new(TerrainClass::Granular, Gait::Crawl, [0.0; 2],
                [[sx * sx, 0.0], [0.0, sy * sy]], 0.95).unwrap();
            let e1 = GaitTerrainEllipse::new(TerrainClass::Granular, Gait::Crawl, [0.0; 2],
                [[a, b], [b, d]], 0.95).unwrap();
            let a0 = ellipse_area(&e0).unwrap();
            let a1 = ellipse_area(&e1).unwrap();
            prop_assert!((a0 - a1).abs() <= 1e-9 * a0.max(1.0));
        }

        #[test]
        fn area_order_matches_determinant_order(
            a in 0.1f64..4.0, b in 0.1f64..4.0, c in 0.1f64..4.0, d in 0.1f64..4.0
        ) {
            let e1 = GaitTerrainEllipse::new(TerrainClass::Stable, Gait::Trot, [0.0; 2], [[a, 0.0], [0.0, b]], 0.95).unwrap();
            let e2 = GaitTerrainEllipse::new(TerrainClass::Stable, Gait::Amble, [1.0, 0.0], [[c, 0.0], [0.0, d]], 0.95).unwrap();
            let by_det = e1.det() < e2.det();
            let by_area = ellipse_area(&e1).unwrap() < ellipse_area(&e2).unwrap();
            prop_assert_eq!(by_det, by_area);
        }

        #[test]
        fn projection_is_affine(a in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let (samples, _, _) = plane_samples(30, &mut rng);
            let m = fit_pca(&samples).unwrap();
            let s1 = &samples[0].0;
            let s2 = &samples[1].0;
            let mix: Vec<f64> = s1.iter().zip(s2).map(|(x, y)| a * x + (1.0 - a) * y).collect();
            let p1 = m.project_slice(s1).unwrap();
            let p2 = m.project_slice(s2).unwrap();
            let pm = m.project_slice(&mix).unwrap();
            for k in 0..2 {
                prop_assert!((pm[k] - (a * p1[k] + (1.0 - a) * p2[k])).abs() < 1e-9);
            }
        }
    }
}
