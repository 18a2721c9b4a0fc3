//! Image reliability: brightness, luma, Haar-wavelet sharpness, a pluggable
//! blur oracle, and their weighted combination into a [0, 1] trust score.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];
/// Default score weights for (r_mean, r_luma, r_hwt, O).
pub const SCORE_WEIGHTS: [f64; 4] = [0.0008, 0.001, 0.0025, 0.003];
/// Edge threshold on the 0-255 intensity scale.
pub const EDGE_THRESHOLD: f64 = 35.0;
const HAAR_LEVELS: usize = 3;

/// 8-bit RGB raster, row-major, interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; width * height * 3] }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for r in 0..height {
            for c in 0..width {
                data.extend_from_slice(&f(r, c));
            }
        }
        Self { width, height, data }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn rotate_180(&self) -> RgbImage {
        let mut out = RgbImage::new(self.width, self.height);
        for r in 0..self.height {
            for c in 0..self.width {
                out.set(self.height - 1 - r, self.width - 1 - c, self.get(r, c));
            }
        }
        out
    }

    /// Horizontal box blur of odd width `k`, edges clamped.
    pub fn box_blur_horizontal(&self, k: usize) -> RgbImage {
        if k <= 1 {
            return self.clone();
        }
        let half = k / 2;
        let w = self.width;
        let mut out = RgbImage::new(self.width, self.height);
        // rounded window means indexed by window sum, avoiding a division per pixel
        let mean: Vec<u8> = (0..=255 * k as u32).map(|sum| ((sum + k as u32 / 2) / k as u32) as u8).collect();
        let mut padded: Vec<[u32; 3]> = Vec::with_capacity(w + 2 * half);
        let widen = |p: &[u8]| [p[0] as u32, p[1] as u32, p[2] as u32];
        for (row, dst) in self.data.chunks_exact(w * 3).zip(out.data.chunks_exact_mut(w * 3)) {
            // the row with its edge pixels replicated `half` times
            padded.clear();
            padded.extend(std::iter::repeat_n(widen(&row[..3]), half));
            padded.extend(row.chunks_exact(3).map(widen));
            padded.extend(std::iter::repeat_n(widen(&row[3 * (w - 1)..]), half));
            let mut sum = [0u32; 3];
            for p in &padded[..k] {
                for ch in 0..3 {
                    sum[ch] += p[ch];
                }
            }
            let entering = padded[k..].iter().chain(std::iter::once(&[0; 3]));
            for ((d, add), sub) in dst.chunks_exact_mut(3).zip(entering).zip(&padded) {
                for ch in 0..3 {
                    d[ch] = mean[sum[ch] as usize];
                    sum[ch] = sum[ch] + add[ch] - sub[ch];
                }
            }
        }
        out
    }

    /// Binary PPM (P6).
    pub fn write_ppm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.data)
    }

    /// Reads a binary (P6) or ASCII (P3) portable pixmap with maxval 255.
    pub fn read_ppm<R: Read>(input: R) -> Result<RgbImage> {
        let mut reader = BufReader::new(input);
        let mut header = Vec::new();
        // magic, width, height, maxval
        while header.len() < 4 {
            let mut line = String::new();
            if reader.read_line(&mut line)? == 0 {
                return Err(Error::Parse("truncated PPM header".into()));
            }
            let line = line.split('#').next().unwrap_or("");
            header.extend(line.split_whitespace().map(str::to_owned));
        }
        let magic = header[0].as_str();
        let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad PPM header field `{s}`")));
        let width = parse(&header[1])?;
        let height = parse(&header[2])?;
        let maxval = parse(&header[3])?;
        if maxval != 255 {
            return Err(Error::Parse(format!("unsupported PPM maxval {maxval}")));
        }
        let len = width * height * 3;
        let data = match magic {
            "P6" => {
                let mut data = vec![0u8; len];
                reader.read_exact(&mut data).map_err(|_| Error::Parse("truncated PPM pixel data".into()))?;
                data
            }
            "P3" => {
                let mut text = String::new();
                reader.read_to_string(&mut text)?;
                let data: Vec<u8> = text
                    .split_whitespace()
                    .map(|t| t.parse::<u8>().map_err(|_| Error::Parse(format!("bad PPM sample `{t}`"))))
                    .collect::<Result<_>>()?;
                if data.len() != len {
                    return Err(Error::Parse("PPM sample count mismatch".into()));
                }
                data
            }
            other => return Err(Error::Parse(format!("unsupported pixmap magic `{other}`"))),
        };
        Ok(RgbImage { width, height, data })
    }

    pub fn load(path: &Path) -> Result<RgbImage> {
        let file = std::fs::File::open(path)?;
        Self::read_ppm(file)
    }
}

fn require_pixels(img: &RgbImage) -> Result<()> {
    if img.pixel_count() == 0 || img.data.len() != img.pixel_count() * 3 {
        return Err(Error::InvalidInput("image has no pixels".into()));
    }
    Ok(())
}

/// Mean over pixels of (R + G + B) / 3, on [0, 255].
pub fn brightness_mean(img: &RgbImage) -> Result<f64> {
    require_pixels(img)?;
    let sum: u64 = img.data.iter().map(|&v| v as u64).sum();
    Ok(sum as f64 / (3.0 * img.pixel_count() as f64))
}

/// Mean weighted luminance, on [0, 255].
pub fn luma(img: &RgbImage, rho: [f64; 3]) -> Result<f64> {
    require_pixels(img)?;
    let mut sums = [0u64; 3];
    for px in img.data.chunks_exact(3) {
        sums[0] += px[0] as u64;
        sums[1] += px[1] as u64;
        sums[2] += px[2] as u64;
    }
    let n = img.pixel_count() as f64;
    Ok((rho[0] * sums[0] as f64 + rho[1] * sums[1] as f64 + rho[2] * sums[2] as f64) / n)
}

/// Result of the multi-scale Haar edge analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaarSharpness {
    /// Fraction of Roof/Gstep edges that lost their fine-scale energy.
    pub blur_extent: f64,
    /// 100 * (1 - blur_extent).
    pub r_hwt: f64,
    pub edges: usize,
    pub dirac_astep: usize,
    pub roof_gstep: usize,
}

/// One level of the orthonormal 2D Haar transform. Returns (LL, edge energy).
/// One Haar level on integer input. Returns the unnormalized approximation
/// band (the plain 2x2 sum) and the squared detail magnitude in the same
/// unnormalized units.
fn haar_level(src: &[i64], w: usize, h: usize) -> (Vec<i64>, Vec<i64>) {
    let (hw, hh) = (w / 2, h / 2);
    let mut ll = Vec::with_capacity(hw * hh);
    let mut emap = Vec::with_capacity(hw * hh);
    for rows in src.chunks_exact(2 * w).take(hh) {
        let (top, bottom) = rows.split_at(w);
        for (t, b) in top.chunks_exact(2).zip(bottom.chunks_exact(2)).take(hw) {
            let (a, b_, d, e) = (t[0], t[1], b[0], b[1]);
            ll.push(a + b_ + d + e);
            let lh = a - b_ + d - e;
            let hl = a + b_ - d - e;
            let hh_ = a - b_ - d + e;
            emap.push(lh * lh + hl * hl + hh_ * hh_);
        }
    }
    (ll, emap)
}

/// Three-level Haar edge-type analysis on the luma channel.
///
/// Each 8x8 block of the source maps to a 4x4, 2x2 and 1x1 window of the
/// level 1, 2, 3 edge maps; the window maxima classify the block's edge.
pub fn haar_sharpness(img: &RgbImage) -> Result<HaarSharpness> {
    require_pixels(img)?;
    let block = 1usize << HAAR_LEVELS;
    if img.width < block || img.height < block {
        return Err(Error::InvalidInput(format!(
            "image {}x{} is smaller than the {block}x{block} minimum",
            img.width, img.height
        )));
    }
    let w = img.width - img.width % block;
    let h = img.height - img.height % block;
    let mut gray = Vec::with_capacity(w * h);
    for row in img.data.chunks_exact(3 * img.width).take(h) {
        // integer milli-luma keeps every Haar sum exact
        gray.extend(row.chunks_exact(3).take(w).map(|p| 299 * p[0] as i64 + 587 * p[1] as i64 + 114 * p[2] as i64));
    }

    let mut emaps = Vec::with_capacity(HAAR_LEVELS);
    let (mut cur, mut cw, mut ch) = (gray, w, h);
    for _ in 0..HAAR_LEVELS {
        let (ll, e) = haar_level(&cur, cw, ch);
        cw /= 2;
        ch /= 2;
        emaps.push((e, cw));
        cur = ll;
    }

    let (bw, bh) = (w / block, h / block);
    // level `l` values carry a factor 2^(l + 1) relative to the normalized
    // transform; the square root of a power-of-four multiple is exact, so
    // rescaling after the root matches the normalized magnitude bit for bit
    let window_max = |level: usize, br: usize, bc: usize| -> f64 {
        let (e, ew) = &emaps[level];
        let size = block >> (level + 1);
        let mut m = 0i64;
        for row in e[br * size * ew..].chunks(*ew).take(size) {
            m = row[bc * size..(bc + 1) * size].iter().fold(m, |m, &v| m.max(v));
        }
        (m as f64).sqrt() / (1u64 << (level + 1)) as f64
    };

    let threshold = EDGE_THRESHOLD * 1000.0;
    let (mut edges, mut dirac_astep, mut roof_gstep, mut blurred) = (0usize, 0usize, 0usize, 0usize);
    for br in 0..bh {
        for bc in 0..bw {
            let e1 = window_max(0, br, bc);
            let e2 = window_max(1, br, bc);
            let e3 = window_max(2, br, bc);
            if !(e1 > threshold || e2 > threshold || e3 > threshold) {
                continue;
            }
            edges += 1;
            if e1 > e2 && e2 > e3 {
                dirac_astep += 1;
            } else if (e1 < e2 && e2 < e3) || (e2 > e1 && e2 > e3) {
                roof_gstep += 1;
                if e1 < threshold {
                    blurred += 1;
                }
            }
        }
    }
    let blur_extent = if roof_gstep == 0 { 0.0 } else { blurred as f64 / roof_gstep as f64 };
    Ok(HaarSharpness { blur_extent, r_hwt: 100.0 * (1.0 - blur_extent), edges, dirac_astep, roof_gstep })
}

/// Pluggable source of the blur-oracle sharpness percentage O on [0, 100].
pub trait BlurOracle: Send + Sync {
    fn sharpness(&self, img: &RgbImage) -> Result<f64>;

    /// Same as [`BlurOracle::sharpness`] when the wavelet score is already known.
    fn sharpness_given_hwt(&self, img: &RgbImage, _r_hwt: f64) -> Result<f64> {
        self.sharpness(img)
    }
}

/// Default oracle: the wavelet sharpness itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct WaveletOracle;

impl BlurOracle for WaveletOracle {
    fn sharpness(&self, img: &RgbImage) -> Result<f64> {
        Ok(haar_sharpness(img)?.r_hwt)
    }

    fn sharpness_given_hwt(&self, _img: &RgbImage, r_hwt: f64) -> Result<f64> {
        Ok(r_hwt)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantOracle(pub f64);

impl BlurOracle for ConstantOracle {
    fn sharpness(&self, _img: &RgbImage) -> Result<f64> {
        Ok(self.0)
    }
}

/// Reports the blur level injected by the renderer, `100 * (1 - level)`.
#[derive(Debug, Clone, Copy)]
pub struct GroundTruthOracle {
    pub blur_level: f64,
}

impl BlurOracle for GroundTruthOracle {
    fn sharpness(&self, _img: &RgbImage) -> Result<f64> {
        Ok(100.0 * (1.0 - self.blur_level.clamp(0.0, 1.0)))
    }
}

/// Runs an external program with a PPM path argument and parses a number
/// from its standard output.
#[derive(Debug, Clone)]
pub struct ExternalOracle {
    pub program: String,
}

impl BlurOracle for ExternalOracle {
    fn sharpness(&self, img: &RgbImage) -> Result<f64> {
        let dir = std::env::temp_dir();
        let path = dir.join(format!("amco-blur-{}-{:p}.ppm", std::process::id(), img as *const _));
        let mut buf = Vec::new();
        img.write_ppm(&mut buf)?;
        std::fs::write(&path, &buf)?;
        let output = std::process::Command::new(&self.program).arg(&path).output();
        let _ = std::fs::remove_file(&path);
        let output = output.map_err(|e| Error::Provider(format!("cannot run `{}`: {e}", self.program)))?;
        if !output.status.success() {
            return Err(Error::Provider(format!("`{}` exited with {}", self.program, output.status)));
        }
        let text = String::from_utf8_lossy(&output.stdout);
        let v: f64 = text
            .trim()
            .parse()
            .map_err(|_| Error::Provider(format!("`{}` printed `{}`, not a number", self.program, text.trim())))?;
        if !(0.0..=100.0).contains(&v) {
            return Err(Error::Provider(format!("oracle value {v} outside [0, 100]")));
        }
        Ok(v)
    }
}

/// Configured oracle kind, `reliability.blur_provider`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BlurProviderKind {
    #[default]
    Wavelet,
    GroundTruth,
    External,
}

/// The four reliability components and the combined score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityScore {
    pub r_mean: f64,
    pub r_luma: f64,
    pub r_hwt: f64,
    pub oracle: f64,
    pub xi: f64,
}

/// Weighted sum of the components, clamped to [0, 1].
pub fn reliability_score(components: [f64; 4], lambda: [f64; 4]) -> Result<f64> {
    if lambda.iter().any(|l| *l < 0.0 || !l.is_finite()) {
        return Err(Error::Config(format!("reliability weights must be non-negative, got {lambda:?}")));
    }
    Ok(reliability_score_unclamped(components, lambda).clamp(0.0, 1.0))
}

pub fn reliability_score_unclamped(components: [f64; 4], lambda: [f64; 4]) -> f64 {
    components.iter().zip(lambda.iter()).map(|(c, l)| c * l).sum()
}

/// Scores an image end to end with the given oracle.
pub fn score_image(
    img: &RgbImage,
    oracle: &dyn BlurOracle,
    rho: [f64; 3],
    lambda: [f64; 4],
) -> Result<ReliabilityScore> {
    let r_mean = brightness_mean(img)?;
    let r_luma = luma(img, rho)?;
    let r_hwt = haar_sharpness(img)?.r_hwt;
    let o = oracle.sharpness_given_hwt(img, r_hwt)?;
    let xi = reliability_score([r_mean, r_luma, r_hwt, o], lambda)?;
    Ok(ReliabilityScore { r_mean, r_luma, r_hwt, oracle: o, xi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn checkerboard(size: usize, cell: usize) -> RgbImage {
        RgbImage::from_fn(size, size, |r, c| if (r / cell + c / cell).is_multiple_of(2) { [0; 3] } else { [255; 3] })
    }

    #[test]
    fn brightness_extremes() {
        assert_eq!(brightness_mean(&RgbImage::filled(4, 4, [0; 3])).unwrap(), 0.0);
        assert_eq!(brightness_mean(&RgbImage::filled(4, 4, [255; 3])).unwrap(), 255.0);
    }

    #[test]
    fn checkerboard_brightness_is_half() {
        let img = checkerboard(8, 1);
        // direct summation oracle
        let mut s = 0.0;
        for r in 0..8 {
            for c in 0..8 {
                let p = img.get(r, c);
                s += (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0;
            }
        }
        assert_eq!(brightness_mean(&img).unwrap(), s / 64.0);
        assert_eq!(brightness_mean(&img).unwrap(), 127.5);
    }

    #[test]
    fn luma_of_pure_green() {
        assert_eq!(LUMA_WEIGHTS, [0.299, 0.587, 0.114]);
        let img = RgbImage::filled(3, 3, [0, 255, 0]);
        assert!((luma(&img, LUMA_WEIGHTS).unwrap() - 149.685).abs() < 1e-9);
    }

    #[test]
    fn luma_equals_mean_on_gray() {
        let img = RgbImage::from_fn(5, 4, |r, c| {
            let v = ((r * 37 + c * 11) % 256) as u8;
            [v, v, v]
        });
        let a = luma(&img, LUMA_WEIGHTS).unwrap();
        let b = brightness_mean(&img).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn empty_image_errors() {
        let img = RgbImage::new(0, 0);
        assert!(brightness_mean(&img).is_err());
        assert!(luma(&img, LUMA_WEIGHTS).is_err());
        assert!(haar_sharpness(&img).is_err());
    }

    #[test]
    fn too_small_for_three_levels() {
        assert!(haar_sharpness(&RgbImage::filled(7, 16, [9; 3])).is_err());
        assert!(haar_sharpness(&RgbImage::filled(8, 8, [9; 3])).is_ok());
    }

    #[test]
    fn constant_image_is_fully_sharp() {
        let s = haar_sharpness(&RgbImage::filled(64, 48, [120; 3])).unwrap();
        assert_eq!(s.edges, 0);
        assert_eq!(s.blur_extent, 0.0);
        assert_eq!(s.r_hwt, 100.0);
    }

    #[test]
    fn step_edges_beat_their_blurred_copy() {
        // vertical step edges every 16 columns
        let sharp = RgbImage::from_fn(128, 64, |_, c| if (c / 16) % 2 == 0 { [20; 3] } else { [230; 3] });
        let blurred = sharp.box_blur_horizontal(9);
        let a = haar_sharpness(&sharp).unwrap().r_hwt;
        let b = haar_sharpness(&blurred).unwrap().r_hwt;
        assert!(a > b, "sharp {a} blurred {b}");
    }

    #[test]
    fn box_blur_preserves_constant_rows() {
        let img = RgbImage::filled(10, 3, [40, 80, 120]);
        assert_eq!(img.box_blur_horizontal(5), img);
    }

    #[test]
    fn oracle_providers() {
        let img = checkerboard(32, 4);
        let hwt = haar_sharpness(&img).unwrap().r_hwt;
        assert_eq!(WaveletOracle.sharpness(&img).unwrap(), hwt);
        assert_eq!(ConstantOracle(50.0).sharpness(&img).unwrap(), 50.0);
        assert_eq!(GroundTruthOracle { blur_level: 0.25 }.sharpness(&img).unwrap(), 75.0);
        let missing = ExternalOracle { program: "/nonexistent/blur-model".into() };
        assert!(matches!(missing.sharpness(&img), Err(Error::Provider(_))));
    }

    #[test]
    fn score_examples() {
        assert_eq!(SCORE_WEIGHTS, [0.0008, 0.001, 0.0025, 0.003]);
        assert_eq!(reliability_score([0.0; 4], SCORE_WEIGHTS).unwrap(), 0.0);
        let raw = reliability_score_unclamped([255.0, 255.0, 100.0, 100.0], SCORE_WEIGHTS);
        let hand = 0.0008 * 255.0 + 0.001 * 255.0 + 0.0025 * 100.0 + 0.003 * 100.0;
        assert!((raw - hand).abs() < 1e-12);
        assert!((raw - 1.009).abs() < 1e-9);
        assert_eq!(reliability_score([255.0, 255.0, 100.0, 100.0], SCORE_WEIGHTS).unwrap(), 1.0);
        assert!(matches!(
            reliability_score([1.0; 4], [-0.1, 0.0, 0.0, 0.0]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn ppm_round_trip_and_ascii() {
        let img = checkerboard(6, 2);
        let mut buf = Vec::new();
        img.write_ppm(&mut buf).unwrap();
        assert_eq!(RgbImage::read_ppm(&buf[..]).unwrap(), img);
        let ascii = b"P3\n# comment\n2 1\n255\n1 2 3 4 5 6\n";
        let a = RgbImage::read_ppm(&ascii[..]).unwrap();
        assert_eq!(a.data, vec![1, 2, 3, 4, 5, 6]);
        assert!(RgbImage::read_ppm(&b"P6\n2 2\n255\n\x01"[..]).is_err());
    }

    proptest! {
        #[test]
        fn score_is_bounded_and_monotone(
            c in proptest::array::uniform4(0.0f64..255.0), bump in 0.0f64..50.0, k in 0usize..4
        ) {
            let mut c = c;
            c[2] = c[2].min(100.0);
            c[3] = c[3].min(100.0);
            let xi = reliability_score(c, SCORE_WEIGHTS).unwrap();
            prop_assert!((0.0..=1.0).contains(&xi));
            let mut d = c;
            d[k] += bump;
            prop_assert!(reliability_score(d, SCORE_WEIGHTS).unwrap() >= xi);
        }

        #[test]
        fn darkening_never_brightens(seed in 0u64..1000, k in 0.0f64..1.0) {
            let img = RgbImage::from_fn(9, 7, |r, c| {
                let v = (seed as usize * 31 + r * 17 + c * 5) % 256;
                [v as u8, (v * 3 % 256) as u8, (v * 7 % 256) as u8]
            });
            let mut dark = img.clone();
            dark.data.iter_mut().for_each(|v| *v = (*v as f64 * k).floor() as u8);
            prop_assert!(brightness_mean(&dark).unwrap() <= brightness_mean(&img).unwrap());
            prop_assert!(luma(&dark, LUMA_WEIGHTS).unwrap() <= luma(&img, LUMA_WEIGHTS).unwrap() + 1e-9);
        }

        #[test]
        fn half_turn_keeps_wavelet_score(seed in 0u64..500) {
            let img = RgbImage::from_fn(64, 48, |r, c| {
                let v = ((seed as usize + (r / 6) * 13 + (c / 5) * 29).wrapping_mul(2654435761) >> 7) % 256;
                [v as u8; 3]
            });
            let a = haar_sharpness(&img).unwrap().r_hwt;
            let b = haar_sharpness(&img.rotate_180()).unwrap().r_hwt;
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
