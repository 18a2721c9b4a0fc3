//! Generative proprioception used by the simulator: per (terrain, gait)
//! Gaussians in a latent plane, lifted to raw 37-channel signals, plus the
//! IMU vibration model and the calibration traverses that produce the
//! ellipse and PCA assets.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::fusion::EllipseTable;
use crate::grid::{Gait, TerrainClass};
use crate::proprio::{fit_ellipse, fit_pca, GaitTerrainEllipse, PcaModel, RawSignal, JOINTS, SIGNAL_DIM};

/// Latent direction (degrees) of each terrain's cloud.
const TERRAIN_ANGLE: [f64; 4] = [0.0, 90.0, 180.0, 270.0];
/// Per terrain, per gait (trot, amble, crawl): center norm, major and minor
/// standard deviation. Smaller clouds mean steadier walking.
const CLOUDS: [[(f64, f64, f64); 3]; 4] = [
    [(0.8, 0.38, 0.30), (1.0, 0.45, 0.36), (1.1, 0.52, 0.42)],
    [(2.6, 1.00, 0.80), (1.8, 0.72, 0.58), (1.2, 0.55, 0.45)],
    [(2.4, 0.95, 0.75), (1.7, 0.70, 0.55), (1.0, 0.50, 0.40)],
    [(2.3, 0.90, 0.70), (1.3, 0.52, 0.42), (1.7, 0.68, 0.52)],
];
/// Angular offset of each gait's cloud around its terrain direction (degrees).
const GAIT_OFFSET: [f64; 3] = [-12.0, 0.0, 12.0];
const BASIS_SEED: u64 = 0x5eed_ba5e;

fn gait_index(g: Gait) -> usize {
    Gait::ALL.iter().position(|x| *x == g).expect("gait in ALL")
}

#[derive(Debug, Clone)]
struct Cloud {
    center: [f64; 2],
    /// Lower Cholesky factor of the covariance.
    chol: [[f64; 2]; 2],
    covariance: [[f64; 2]; 2],
}

/// Ground-truth proprioceptive response of the simulated robot.
#[derive(Debug, Clone)]
pub struct TruthModel {
    clouds: Vec<Cloud>,
    nominal: Vec<f64>,
    basis: [Vec<f64>; 2],
}

impl Default for TruthModel {
    fn default() -> Self {
        Self::new()
    }
}

impl TruthModel {
    pub fn new() -> Self {
        let mut raw_centers = Vec::new();
        let mut covs = Vec::new();
        for (ti, row) in CLOUDS.iter().enumerate() {
            for (gi, &(norm, s_major, s_minor)) in row.iter().enumerate() {
                let a = (TERRAIN_ANGLE[ti] + GAIT_OFFSET[gi]).to_radians();
                let (s, c) = a.sin_cos();
                raw_centers.push([norm * c, norm * s]);
                // major axis along the radial direction
                let (l1, l2) = (s_major * s_major, s_minor * s_minor);
                covs.push([[l1 * c * c + l2 * s * s, (l1 - l2) * c * s], [(l1 - l2) * c * s, l1 * s * s + l2 * c * c]]);
            }
        }
        // center the pooled cloud so projected norms match latent norms
        let k = raw_centers.len() as f64;
        let mx = raw_centers.iter().map(|c| c[0]).sum::<f64>() / k;
        let my = raw_centers.iter().map(|c| c[1]).sum::<f64>() / k;
        let clouds = raw_centers
            .into_iter()
            .zip(covs)
            .map(|(c, cov)| {
                let l00 = cov[0][0].sqrt();
                let l10 = cov[1][0] / l00;
                let l11 = (cov[1][1] - l10 * l10).sqrt();
                Cloud { center: [c[0] - mx, c[1] - my], chol: [[l00, 0.0], [l10, l11]], covariance: cov }
            })
            .collect();

        let mut nominal = Vec::with_capacity(SIGNAL_DIM);
        for _ in 0..4 {
            nominal.extend_from_slice(&[0.0, 0.75, -1.45]);
        }
        nominal.extend(std::iter::repeat_n(0.0, JOINTS));
        for _ in 0..4 {
            nominal.extend_from_slice(&[2.0, 12.0, 25.0]);
        }
        nominal.push(6.0);

        let mut rng = ChaCha8Rng::seed_from_u64(BASIS_SEED);
        let mut b0: Vec<f64> = (0..SIGNAL_DIM).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut b1: Vec<f64> = (0..SIGNAL_DIM).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        normalize(&mut b0);
        let d: f64 = b0.iter().zip(&b1).map(|(a, b)| a * b).sum();
        b1.iter_mut().zip(&b0).for_each(|(x, y)| *x -= d * y);
        normalize(&mut b1);
        Self { clouds, nominal, basis: [b0, b1] }
    }

    fn cloud(&self, terrain: TerrainClass, gait: Gait) -> &Cloud {
        assert!(terrain.is_terrain(), "no proprioceptive response for {terrain}");
        &self.clouds[terrain.index() * 3 + gait_index(gait)]
    }

    /// Mean latent point on ground of the given deformability.
    pub fn mean(&self, terrain: TerrainClass, gait: Gait, deformability: f64, drift: f64) -> [f64; 2] {
        let c = self.cloud(terrain, gait).center;
        let n = c[0].hypot(c[1]);
        let k = deformability * drift / n;
        [c[0] * (1.0 + k), c[1] * (1.0 + k)]
    }

    pub fn covariance(&self, terrain: TerrainClass, gait: Gait, deformability: f64) -> [[f64; 2]; 2] {
        let c = self.cloud(terrain, gait).covariance;
        let s = 1.0 + deformability;
        [[c[0][0] * s, c[0][1] * s], [c[1][0] * s, c[1][1] * s]]
    }

    /// Area of the true cloud's 95% ellipse; only its ordering matters.
    pub fn spread(&self, terrain: TerrainClass, gait: Gait) -> f64 {
        let c = self.cloud(terrain, gait).covariance;
        (c[0][0] * c[1][1] - c[0][1] * c[1][0]).sqrt()
    }

    /// Steadiest gait on this terrain.
    pub fn best_gait(&self, terrain: TerrainClass) -> Gait {
        let mut best = Gait::ALL[0];
        for g in &Gait::ALL[1..] {
            if self.spread(terrain, *g) < self.spread(terrain, best) {
                best = *g;
            }
        }
        best
    }

    /// Latent draw and the raw signal it produces.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        terrain: TerrainClass,
        gait: Gait,
        deformability: f64,
        drift: f64,
        noise: f64,
        rng: &mut R,
    ) -> (RawSignal, [f64; 2]) {
        let cloud = self.cloud(terrain, gait);
        let m = self.mean(terrain, gait, deformability, drift);
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let s = (1.0 + deformability).sqrt();
        let l = cloud.chol;
        let p = [m[0] + s * l[0][0] * z0, m[1] + s * (l[1][0] * z0 + l[1][1] * z1)];
        (self.lift(p, noise, rng), p)
    }

    /// Raw signal for latent point `p` plus isotropic channel noise.
    pub fn lift<R: Rng + ?Sized>(&self, p: [f64; 2], noise: f64, rng: &mut R) -> RawSignal {
        let values = (0..SIGNAL_DIM)
            .map(|i| {
                let e: f64 = rng.sample(StandardNormal);
                self.nominal[i] + self.basis[0][i] * p[0] + self.basis[1][i] * p[1] + noise * e
            })
            .collect();
        RawSignal(values)
    }

    /// Standard deviation of body vibration per axis before terrain and
    /// norm effects; grows with the gait's cloud spread.
    pub fn vibration_base(&self, terrain: TerrainClass, gait: Gait, base: f64) -> f64 {
        base * (self.spread(terrain, gait) / self.spread(TerrainClass::Stable, Gait::Trot)).sqrt()
    }

    /// One IMU sample: `base * (1 + roughness) * (1 + gain * norm) * N(0, 1)` per axis.
    #[allow(clippy::too_many_arguments)]
    pub fn acceleration<R: Rng + ?Sized>(
        &self,
        terrain: TerrainClass,
        gait: Gait,
        roughness: f64,
        norm: f64,
        base: f64,
        gain: f64,
        rng: &mut R,
    ) -> [f64; 3] {
        let sigma = self.vibration_base(terrain, gait, base) * (1.0 + roughness) * (1.0 + gain * norm);
        [0; 3].map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Calibration outcome: the projection and the fitted ellipse table.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub pca: PcaModel,
    pub table: EllipseTable,
}

/// Walks every (terrain, gait) pair on firm ground, fits the PCA on the
/// pooled signals, and fits one ellipse per pair in the projected plane.
pub fn calibrate(
    truth: &TruthModel,
    samples_per_pair: usize,
    seed: u64,
    noise: f64,
    confidence: f64,
) -> Result<Calibration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    let mut pooled = Vec::new();
    for t in TerrainClass::TERRAINS {
        for g in Gait::ALL {
            let signals: Vec<RawSignal> =
                (0..samples_per_pair).map(|_| truth.sample(t, g, 0.0, 0.0, noise, &mut rng).0).collect();
            pooled.extend(signals.iter().cloned());
            pairs.push((t, g, signals));
        }
    }
    let pca = fit_pca(&pooled)?;
    let mut ellipses: Vec<GaitTerrainEllipse> = Vec::new();
    for (t, g, signals) in &pairs {
        let pts = pca.project_batch(signals)?;
        ellipses.push(fit_ellipse(*t, *g, &pts, confidence)?);
    }
    Ok(Calibration { pca, table: EllipseTable::new(ellipses)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proprio::traversability;

    #[test]
    fn best_gaits_per_terrain() {
        let t = TruthModel::new();
        assert_eq!(t.best_gait(TerrainClass::Stable), Gait::Trot);
        assert_eq!(t.best_gait(TerrainClass::Granular), Gait::Crawl);
        assert_eq!(t.best_gait(TerrainClass::PoorFoothold), Gait::Crawl);
        assert_eq!(t.best_gait(TerrainClass::HighResistance), Gait::Amble);
    }

    #[test]
    fn pooled_centers_are_zero_mean() {
        let t = TruthModel::new();
        let (mut sx, mut sy) = (0.0, 0.0);
        for c in &t.clouds {
            sx += c.center[0];
            sy += c.center[1];
        }
        assert!(sx.abs() < 1e-12 && sy.abs() < 1e-12);
    }

    #[test]
    fn drift_pushes_outward() {
        let t = TruthModel::new();
        let a = t.mean(TerrainClass::Granular, Gait::Crawl, 0.0, 2.0);
        let b = t.mean(TerrainClass::Granular, Gait::Crawl, 0.75, 2.0);
        assert!((traversability(b) - traversability(a) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn basis_is_orthonormal() {
        let t = TruthModel::new();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        assert!((dot(&t.basis[0], &t.basis[0]) - 1.0).abs() < 1e-12);
        assert!((dot(&t.basis[1], &t.basis[1]) - 1.0).abs() < 1e-12);
        assert!(dot(&t.basis[0], &t.basis[1]).abs() < 1e-12);
    }

    #[test]
    fn calibration_recovers_gait_order() {
        let t = TruthModel::new();
        let cal = calibrate(&t, 300, 11, 0.02, 0.95).unwrap();
        for terrain in TerrainClass::TERRAINS {
            assert_eq!(cal.table.best_gait(terrain).unwrap(), t.best_gait(terrain), "{terrain}");
        }
    }
}
