//! Synthetic camera frames with ground-truth labels, and the segmentation
//! corruption model.

use rand::Rng;

use crate::grid::{LabelImage, Pose, TerrainClass};
use crate::planner::CameraModel;
use crate::reliability::RgbImage;
use crate::sim::world::World;

/// Side of a texture patch painted on the ground, m.
const TEXEL: f64 = 0.05;
const TEXTURE_AMPLITUDE: f64 = 40.0;
const SENSOR_NOISE: i32 = 4;
const SKY: [f64; 3] = [170.0, 200.0, 230.0];
/// Ground outside the world map.
const BEYOND: [f64; 3] = [120.0, 120.0, 110.0];

fn base_color(class: TerrainClass) -> [f64; 3] {
    match class {
        TerrainClass::Stable => [96.0, 140.0, 70.0],
        TerrainClass::Granular => [194.0, 170.0, 120.0],
        TerrainClass::PoorFoothold => [110.0, 85.0, 60.0],
        TerrainClass::HighResistance => [55.0, 95.0, 40.0],
        TerrainClass::Obstacle => [80.0, 78.0, 85.0],
        TerrainClass::Unknown => BEYOND,
    }
}

fn hash2(x: i64, y: i64, salt: u64) -> u64 {
    let mut h = (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F) ^ salt;
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    h = h.wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    h ^ (h >> 33)
}

/// Fractional bits of the fixed-point texel coordinates used while rendering.
const FIX: u32 = 16;
/// Ground hits farther than this are drawn as ground beyond the map.
const MAX_RANGE: f64 = 1.0e4;

/// Ground point of every pixel center in the robot frame, computed once per
/// camera.
#[derive(Debug, Clone)]
pub struct RenderCache {
    pub camera: CameraModel,
    ground: Vec<Option<(f64, f64)>>,
    /// The same points in fixed-point texel units; `None` for sky.
    ground_fixed: Vec<Option<(i64, i64)>>,
}

impl RenderCache {
    pub fn new(camera: CameraModel) -> Self {
        let mut ground = Vec::with_capacity(camera.width * camera.height);
        for r in 0..camera.height {
            for c in 0..camera.width {
                ground.push(camera.ground_point(c as f64 + 0.5, r as f64 + 0.5));
            }
        }
        let scale = (1u64 << FIX) as f64 / TEXEL;
        let ground_fixed = ground
            .iter()
            .map(|g| {
                g.map(|(x, y)| {
                    let (x, y) = (x.clamp(-MAX_RANGE, MAX_RANGE), y.clamp(-MAX_RANGE, MAX_RANGE));
                    ((x * scale).round() as i64, (y * scale).round() as i64)
                })
            })
            .collect();
        Self { camera, ground, ground_fixed }
    }

    pub fn ground(&self, row: usize, col: usize) -> Option<(f64, f64)> {
        self.ground[row * self.camera.width + col]
    }

    /// Grid cells with at least half of their pixels on the ground patch
    /// `near <= x <= far`, `|y| <= half_width`.
    pub fn footprint_cells(&self, n: usize, near: f64, far: f64, half_width: f64) -> Vec<(usize, usize)> {
        let (gw, gh) = (self.camera.width.div_ceil(n), self.camera.height.div_ceil(n));
        let mut inside = vec![0usize; gw * gh];
        let mut total = vec![0usize; gw * gh];
        let mut any = vec![false; gw * gh];
        for r in 0..self.camera.height {
            for c in 0..self.camera.width {
                let k = (r / n) * gw + c / n;
                total[k] += 1;
                if let Some((x, y)) = self.ground(r, c) {
                    if x >= near && x <= far && y.abs() <= half_width {
                        inside[k] += 1;
                        any[k] = true;
                    }
                }
            }
        }
        let mut cells: Vec<(usize, usize)> =
            (0..gw * gh).filter(|&k| 2 * inside[k] >= total[k] && inside[k] > 0).map(|k| (k / gw, k % gw)).collect();
        if cells.is_empty() {
            cells = (0..gw * gh).filter(|&k| any[k]).map(|k| (k / gw, k % gw)).collect();
        }
        cells
    }
}

/// Horizontal blur kernel width for the given speed and roughness.
pub fn blur_kernel(speed: f64, roughness: f64, gain: f64, max_kernel: usize) -> usize {
    let half = (gain * (speed.abs() + roughness)).round().max(0.0) as usize;
    (1 + 2 * half).min(max_kernel)
}

/// Blur level in [0, 1] reported by the ground-truth oracle.
pub fn blur_level(kernel: usize, max_kernel: usize) -> f64 {
    if max_kernel <= 1 {
        0.0
    } else {
        (kernel - 1) as f64 / (max_kernel - 1) as f64
    }
}

/// The world's ground painted at texel resolution: class, unlit color and
/// lighting of every texel. Built once per world so rendering is a lookup.
#[derive(Debug, Clone)]
pub struct GroundTexture {
    cols: usize,
    rows: usize,
    texels: Vec<Texel>,
}

#[derive(Debug, Clone, Copy)]
struct Texel {
    class: TerrainClass,
    /// Unlit color in 1/256 units.
    color: [i32; 3],
    /// Lighting in 1/256 units.
    light: i32,
}

fn to_fixed_color(color: [f64; 3]) -> [i32; 3] {
    color.map(|v| (v * 256.0).round() as i32)
}

fn to_fixed_light(light: f64) -> i32 {
    (light * 256.0).round() as i32
}

impl GroundTexture {
    /// Each texel takes the cell under its center.
    pub fn new(world: &World) -> Self {
        let cols = (world.width_m() / TEXEL).ceil() as usize;
        let rows = (world.height_m() / TEXEL).ceil() as usize;
        let mut texels = Vec::with_capacity(cols * rows);
        for ty in 0..rows {
            for tx in 0..cols {
                let x = ((tx as f64 + 0.5) * TEXEL).min(world.width_m() - 1e-9);
                let y = ((ty as f64 + 0.5) * TEXEL).min(world.height_m() - 1e-9);
                let cell = world.cell_at(x, y).copied().unwrap_or_default();
                let class = if cell.obstacle { TerrainClass::Obstacle } else { cell.terrain };
                let hsh = hash2(tx as i64, ty as i64, class.index() as u64);
                let t = (hsh & 0xFFFF) as f64 / 65535.0 * 2.0 - 1.0;
                let tint = ((hsh >> 16) & 0xFF) as f64 / 255.0 * 0.2 - 0.1;
                let base = base_color(class);
                let color = [
                    base[0] * (1.0 + tint) + TEXTURE_AMPLITUDE * t,
                    base[1] + TEXTURE_AMPLITUDE * t,
                    base[2] * (1.0 - tint) + TEXTURE_AMPLITUDE * t,
                ];
                texels.push(Texel { class, color: to_fixed_color(color), light: to_fixed_light(cell.lighting) });
            }
        }
        Self { cols, rows, texels }
    }

    /// Texel under a fixed-point texel coordinate.
    fn at_fixed(&self, x: i64, y: i64) -> Option<&Texel> {
        let (tx, ty) = (x >> FIX, y >> FIX);
        if tx < 0 || ty < 0 || tx >= self.cols as i64 || ty >= self.rows as i64 {
            return None;
        }
        Some(&self.texels[ty as usize * self.cols + tx as usize])
    }

    fn at(&self, x: f64, y: f64) -> Option<&Texel> {
        let scale = (1u64 << FIX) as f64 / TEXEL;
        self.at_fixed((x * scale).floor() as i64, (y * scale).floor() as i64)
    }
}

/// Camera frame and its unblurred per-pixel labels.
pub fn render_camera<R: Rng + ?Sized>(
    ground: &GroundTexture,
    pose: &Pose,
    cache: &RenderCache,
    kernel: usize,
    rng: &mut R,
) -> (RgbImage, LabelImage) {
    let cam = &cache.camera;
    let mut img = RgbImage::new(cam.width, cam.height);
    let mut labels = LabelImage::new(cam.width, cam.height, TerrainClass::Unknown);
    let sky_light = ground.at(pose.x, pose.y).map_or(256, |t| t.light);
    let (sky, beyond) = (to_fixed_color(SKY), to_fixed_color(BEYOND));
    let one = (1i64 << FIX) as f64;
    let scale = one / TEXEL;
    let (px0, py0) = ((pose.x * scale).round() as i64, (pose.y * scale).round() as i64);
    let (s, c) = pose.theta.sin_cos();
    let (s, c) = ((s * one).round() as i64, (c * one).round() as i64);
    let levels = (2 * SENSOR_NOISE + 1) as u32;
    let mut bits = 0u32;
    let pixels = img.data.chunks_exact_mut(3).zip(labels.labels.iter_mut()).zip(cache.ground_fixed.iter());
    for (i, ((px, label), point)) in pixels.enumerate() {
        // one 32-bit draw feeds four pixels; each byte is scaled onto the noise levels
        if i % 4 == 0 {
            bits = rng.random();
        }
        let byte = (bits >> (8 * (i % 4))) & 0xFF;
        let noise = (((byte * levels) >> 8) as i32 - SENSOR_NOISE) << 8;
        let (color, light) = match *point {
            None => (sky, sky_light),
            Some((gx, gy)) => {
                let x = px0 + ((c * gx - s * gy) >> FIX);
                let y = py0 + ((s * gx + c * gy) >> FIX);
                match ground.at_fixed(x, y) {
                    None => (beyond, sky_light),
                    Some(t) => {
                        *label = t.class;
                        (t.color, t.light)
                    }
                }
            }
        };
        for (out, v) in px.iter_mut().zip(color) {
            *out = (((v + noise) * light + (1 << 15)) >> 16).clamp(0, 255) as u8;
        }
    }
    let img = if kernel > 1 { img.box_blur_horizontal(kernel) } else { img };
    (img, labels)
}

/// Flips whole `block x block` tiles to another terrain class with
/// probability `scale * (1 - xi)`. Tiles dominated by unknown pixels are
/// left alone.
pub fn corrupt_segmentation<R: Rng + ?Sized>(
    truth: &LabelImage,
    xi: f64,
    scale: f64,
    block: usize,
    rng: &mut R,
) -> (LabelImage, usize) {
    let p_flip = scale * (1.0 - xi.clamp(0.0, 1.0));
    let mut out = truth.clone();
    let mut flipped = 0;
    for br in 0..truth.height.div_ceil(block) {
        for bc in 0..truth.width.div_ceil(block) {
            let u: f64 = rng.random();
            let pick: usize = rng.random_range(0..3);
            if u >= p_flip {
                continue;
            }
            let (r0, c0) = (br * block, bc * block);
            let (r1, c1) = ((r0 + block).min(truth.height), (c0 + block).min(truth.width));
            let mut counts = [0usize; TerrainClass::COUNT];
            for r in r0..r1 {
                for c in c0..c1 {
                    counts[truth.get(r, c).index()] += 1;
                }
            }
            let mut majority = 0;
            for k in 1..TerrainClass::COUNT {
                if counts[k] > counts[majority] {
                    majority = k;
                }
            }
            let majority = TerrainClass::ALL[majority];
            if majority == TerrainClass::Unknown {
                continue;
            }
            let others: Vec<TerrainClass> = TerrainClass::TERRAINS.iter().copied().filter(|t| *t != majority).collect();
            let replacement = others[pick % others.len()];
            for r in r0..r1 {
                for c in c0..c1 {
                    out.set(r, c, replacement);
                }
            }
            flipped += 1;
        }
    }
    (out, flipped)
}
