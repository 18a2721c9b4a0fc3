//! Shared grid, terrain, and pose types.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Terrain category of a pixel or cell.
///
/// The four traversable classes come first; their declaration order is the
/// tie-break order for majority votes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerrainClass {
    Stable,
    Granular,
    PoorFoothold,
    HighResistance,
    Obstacle,
    Unknown,
}

impl TerrainClass {
    pub const ALL: [TerrainClass; 6] = [
        TerrainClass::Stable,
        TerrainClass::Granular,
        TerrainClass::PoorFoothold,
        TerrainClass::HighResistance,
        TerrainClass::Obstacle,
        TerrainClass::Unknown,
    ];

    /// Classes that carry gait-terrain ellipses.
    pub const TERRAINS: [TerrainClass; 4] = [
        TerrainClass::Stable,
        TerrainClass::Granular,
        TerrainClass::PoorFoothold,
        TerrainClass::HighResistance,
    ];

    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_terrain(self) -> bool {
        !matches!(self, TerrainClass::Obstacle | TerrainClass::Unknown)
    }

    pub fn name(self) -> &'static str {
        match self {
            TerrainClass::Stable => "stable",
            TerrainClass::Granular => "granular",
            TerrainClass::PoorFoothold => "poor_foothold",
            TerrainClass::HighResistance => "high_resistance",
            TerrainClass::Obstacle => "obstacle",
            TerrainClass::Unknown => "unknown",
        }
    }
}

impl fmt::Display for TerrainClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TerrainClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown terrain class `{s}`")))
    }
}

/// Locomotion gait. Declaration order is the argmin tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gait {
    Trot,
    Amble,
    Crawl,
}

/// Speed cap of the crawl gait.
pub const CRAWL_MAX_VELOCITY: f64 = 0.25;
/// Speed cap shared by trot and amble.
pub const TROT_MAX_VELOCITY: f64 = 0.6;

impl Gait {
    pub const ALL: [Gait; 3] = [Gait::Trot, Gait::Amble, Gait::Crawl];

    pub fn max_linear_velocity(self) -> f64 {
        match self {
            Gait::Trot | Gait::Amble => TROT_MAX_VELOCITY,
            Gait::Crawl => CRAWL_MAX_VELOCITY,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gait::Trot => "trot",
            Gait::Amble => "amble",
            Gait::Crawl => "crawl",
        }
    }
}

impl fmt::Display for Gait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Gait {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown gait `{s}`")))
    }
}

/// Wraps an angle to (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

/// Planar pose in the world frame. X forward, Y left in the robot frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: normalize_angle(theta) }
    }

    /// Maps a robot-frame point to the world frame.
    pub fn transform_point(&self, px: f64, py: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * px - s * py, self.y + s * px + c * py)
    }

    /// Maps a world-frame point into the robot frame.
    pub fn inverse_transform_point(&self, wx: f64, wy: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let dx = wx - self.x;
        let dy = wy - self.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (x - self.x).hypot(y - self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    /// Linear velocity, m/s.
    pub v: f64,
    /// Angular velocity, rad/s.
    pub omega: f64,
}

impl VelocityCommand {
    pub const STOP: VelocityCommand = VelocityCommand { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub fn is_within(&self, gait: Gait, omega_max: f64) -> bool {
        self.v.abs() <= gait.max_linear_velocity() + 1e-12 && self.omega.abs() <= omega_max + 1e-12
    }
}

/// Per-pixel terrain labels, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<TerrainClass>,
}

impl LabelImage {
    pub fn new(width: usize, height: usize, fill: TerrainClass) -> Self {
        Self { width, height, labels: vec![fill; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> TerrainClass) -> Self {
        let mut labels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                labels.push(f(r, c));
            }
        }
        Self { width, height, labels }
    }

    pub fn get(&self, row: usize, col: usize) -> TerrainClass {
        self.labels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, class: TerrainClass) {
        self.labels[row * self.width + col] = class;
    }

    pub fn class_counts(&self) -> [u64; TerrainClass::COUNT] {
        let mut counts = [0u64; TerrainClass::COUNT];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }
}

/// Per-cell class histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassHistogram {
    pub counts: [u32; TerrainClass::COUNT],
}

impl ClassHistogram {
    pub fn add(&mut self, class: TerrainClass, n: u32) {
        self.counts[class.index()] += n;
    }

    pub fn count(&self, class: TerrainClass) -> u32 {
        self.counts[class.index()]
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Most frequent class; ties go to the earlier class in declaration order.
    pub fn majority(&self) -> TerrainClass {
        majority_of(&self.counts, &TerrainClass::ALL)
    }

    /// Most frequent traversable class, or `None` when no terrain pixel exists.
    pub fn terrain_majority(&self) -> Option<TerrainClass> {
        let any = TerrainClass::TERRAINS.iter().any(|c| self.count(*c) > 0);
        any.then(|| majority_of(&self.counts, &TerrainClass::TERRAINS))
    }

    pub fn merge(&mut self, other: &ClassHistogram) {
        for (a, b) in self.counts.iter_mut().zip(other.counts.iter()) {
            *a += *b;
        }
    }
}

fn majority_of(counts: &[u32; TerrainClass::COUNT], candidates: &[TerrainClass]) -> TerrainClass {
    let mut best = candidates[0];
    for &c in &candidates[1..] {
        if counts[c.index()] > counts[best.index()] {
            best = c;
        }
    }
    best
}

/// Segmentation discretized into n x n pixel cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticGrid {
    pub width: usize,
    pub height: usize,
    pub cell_pixels: usize,
    cells: Vec<ClassHistogram>,
}

impl SemanticGrid {
    pub fn cell(&self, row: usize, col: usize) -> &ClassHistogram {
        &self.cells[row * self.width + col]
    }

    pub fn majority(&self, row: usize, col: usize) -> TerrainClass {
        self.cell(row, col).majority()
    }

    pub fn cells(&self) -> &[ClassHistogram] {
        &self.cells
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Bins a per-pixel label image into `n x n` cells. Partial border cells are
/// padded with `Unknown` so every histogram sums to `n^2`.
pub fn discretize_semantic(image: &LabelImage, n: usize) -> Result<SemanticGrid> {
    if image.width == 0 || image.height == 0 || image.labels.is_empty() {
        return Err(Error::InvalidInput("empty label image".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("cell size n must be at least 1".into()));
    }
    if image.labels.len() != image.width * image.height {
        return Err(Error::InvalidInput("label buffer does not match dimensions".into()));
    }
    let gw = image.width.div_ceil(n);
    let gh = image.height.div_ceil(n);
    let mut cells = vec![ClassHistogram::default(); gw * gh];
    for r in 0..image.height {
        let row = &image.labels[r * image.width..(r + 1) * image.width];
        let base = (r / n) * gw;
        for (cell, span) in cells[base..base + gw].iter_mut().zip(row.chunks(n)) {
            for l in span {
                cell.counts[l.index()] += 1;
            }
        }
    }
    let full = (n * n) as u32;
    for h in &mut cells {
        let missing = full - h.total();
        h.add(TerrainClass::Unknown, missing);
    }
    Ok(SemanticGrid { width: gw, height: gh, cell_pixels: n, cells })
}

/// Which of the fused maps a [`CostMap`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    General,
    History,
    Proprio,
    Coupled,
}

impl MapKind {
    pub const ALL: [MapKind; 4] = [MapKind::General, MapKind::History, MapKind::Proprio, MapKind::Coupled];

    pub fn name(self) -> &'static str {
        match self {
            MapKind::General => "general",
            MapKind::History => "history",
            MapKind::Proprio => "proprio",
            MapKind::Coupled => "coupled",
        }
    }
}

pub const COST_MAX: f64 = 255.0;

pub fn clamp_cost(v: f64) -> f64 {
    v.clamp(0.0, COST_MAX)
}

/// Unclamped per-cell values, e.g. the signed history correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![0.0; width * height] }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.values[row * self.width + col] = v;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Grid-resolution traversability costs, always within [0, 255].
#[derive(Debug, Clone, PartialEq)]
pub struct CostMap {
    width: usize,
    height: usize,
    kind: MapKind,
    values: Vec<f64>,
}

impl CostMap {
    pub fn filled(width: usize, height: usize, kind: MapKind, value: f64) -> Self {
        Self { width, height, kind, values: vec![clamp_cost(value); width * height] }
    }

    pub fn from_values(width: usize, height: usize, kind: MapKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "cost map buffer has {} values, expected {}",
                values.len(),
                width * height
            )));
        }
        Ok(Self { width, height, kind, values: values.into_iter().map(clamp_cost).collect() })
    }

    pub fn from_field(field: &Field, kind: MapKind) -> Self {
        Self {
            width: field.width,
            height: field.height,
            kind,
            values: field.values.iter().copied().map(clamp_cost).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.values[row * self.width + col] = clamp_cost(v);
    }

    pub fn to_field(&self) -> Field {
        Field { width: self.width, height: self.height, values: self.values.clone() }
    }

    /// Nearest-neighbor upsampling, one cell to `scale x scale` pixels.
    pub fn upsample(&self, scale: usize) -> CostMap {
        let scale = scale.max(1);
        let w = self.width * scale;
        let h = self.height * scale;
        let mut values = Vec::with_capacity(w * h);
        for r in 0..h {
            for c in 0..w {
                values.push(self.get(r / scale, c / scale));
            }
        }
        CostMap { width: w, height: h, kind: self.kind, values }
    }

    /// Binary 8-bit grayscale PGM (P5).
    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.values.iter().map(|v| v.round() as u8).collect();
        out.write_all(&bytes)
    }

    /// One CSV row per grid row, integer costs.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in 0..self.height {
            let row: Vec<String> =
                (0..self.width).map(|c| format!("{}", self.get(r, c).round() as u8)).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_image_discretizes_to_uniform_cells() {
        let img = LabelImage::new(80, 80, TerrainClass::Granular);
        let grid = discretize_semantic(&img, 40).unwrap();
        assert_eq!(grid.dims(), (2, 2));
        for h in grid.cells() {
            assert_eq!(h.majority(), TerrainClass::Granular);
            assert_eq!(h.count(TerrainClass::Granular), 1600);
            assert_eq!(h.total(), 1600);
        }
    }

    #[test]
    fn paper_cell_size_gives_side_over_forty() {
        let img = LabelImage::new(320, 240, TerrainClass::Stable);
        let grid = discretize_semantic(&img, 40).unwrap();
        assert_eq!(grid.dims(), (8, 6));
    }

    #[test]
    fn split_image_counts_each_half() {
        // 40 rows x 80 columns, left half stable, right half granular.
        let img = LabelImage::from_fn(80, 40, |_, c| {
            if c < 40 {
                TerrainClass::Stable
            } else {
                TerrainClass::Granular
            }
        });
        let grid = discretize_semantic(&img, 40).unwrap();
        assert_eq!(grid.dims(), (2, 1));
        // pixel-counting oracle
        for col in 0..2 {
            let mut stable = 0;
            let mut granular = 0;
            for r in 0..40 {
                for c in col * 40..(col + 1) * 40 {
                    match img.get(r, c) {
                        TerrainClass::Stable => stable += 1,
                        TerrainClass::Granular => granular += 1,
                        _ => {}
                    }
                }
            }
            let h = grid.cell(0, col);
            assert_eq!(h.count(TerrainClass::Stable), stable);
            assert_eq!(h.count(TerrainClass::Granular), granular);
        }
        assert_eq!(grid.majority(0, 0), TerrainClass::Stable);
        assert_eq!(grid.majority(0, 1), TerrainClass::Granular);
    }

    #[test]
    fn border_cells_are_padded_with_unknown() {
        let img = LabelImage::new(50, 45, TerrainClass::Stable);
        let grid = discretize_semantic(&img, 40).unwrap();
        assert_eq!(grid.dims(), (2, 2));
        let corner = grid.cell(1, 1);
        assert_eq!(corner.total(), 1600);
        assert_eq!(corner.count(TerrainClass::Stable), 10 * 5);
        assert_eq!(corner.majority(), TerrainClass::Unknown);
    }

    #[test]
    fn empty_image_and_zero_cell_size_are_rejected() {
        let empty = LabelImage { width: 0, height: 0, labels: vec![] };
        assert!(discretize_semantic(&empty, 40).is_err());
        let img = LabelImage::new(4, 4, TerrainClass::Stable);
        assert!(discretize_semantic(&img, 0).is_err());
    }

    #[test]
    fn majority_ties_follow_class_order() {
        let mut h = ClassHistogram::default();
        h.add(TerrainClass::HighResistance, 5);
        h.add(TerrainClass::Granular, 5);
        assert_eq!(h.majority(), TerrainClass::Granular);
        h.add(TerrainClass::Stable, 5);
        assert_eq!(h.majority(), TerrainClass::Stable);
    }

    #[test]
    fn angles_wrap_into_half_open_interval() {
        assert!((normalize_angle(PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!(normalize_angle(0.0).abs() < 1e-12);
    }

    #[test]
    fn pose_transforms_invert() {
        let p = Pose::new(1.0, -2.0, 0.7);
        let (wx, wy) = p.transform_point(0.4, -0.3);
        let (rx, ry) = p.inverse_transform_point(wx, wy);
        assert!((rx - 0.4).abs() < 1e-12 && (ry + 0.3).abs() < 1e-12);
    }

    #[test]
    fn gait_speed_caps() {
        assert!(Gait::Crawl.max_linear_velocity() < Gait::Trot.max_linear_velocity());
        assert_eq!(Gait::Amble.max_linear_velocity(), Gait::Trot.max_linear_velocity());
    }

    #[test]
    fn pgm_and_csv_exports() {
        let mut m = CostMap::filled(3, 2, MapKind::General, 10.0);
        m.set(1, 2, 300.0);
        let mut pgm = Vec::new();
        m.write_pgm(&mut pgm).unwrap();
        assert!(pgm.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&pgm[pgm.len() - 6..], &[10, 10, 10, 10, 10, 255]);
        let mut csv = Vec::new();
        m.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "10,10,10\n10,10,255\n");
        let up = m.upsample(2);
        assert_eq!(up.dims(), (6, 4));
        assert_eq!(up.get(3, 5), 255.0);
    }

    fn arb_label() -> impl Strategy<Value = TerrainClass> {
        (0usize..TerrainClass::COUNT).prop_map(|i| TerrainClass::from_index(i).unwrap())
    }

    proptest! {
        #[test]
        fn discretize_preserves_class_totals(
            w in 1usize..50, h in 1usize..50, n in 1usize..12,
            seed in proptest::collection::vec(arb_label(), 1..64)
        ) {
            let img = LabelImage::from_fn(w, h, |r, c| seed[(r * 31 + c * 7) % seed.len()]);
            let grid = discretize_semantic(&img, n).unwrap();
            let mut totals = ClassHistogram::default();
            for cell in grid.cells() {
                prop_assert_eq!(cell.total() as usize, n * n);
                totals.merge(cell);
            }
            let padding = (grid.width * n * grid.height * n - w * h) as u64;
            let expected = img.class_counts();
            for class in TerrainClass::ALL {
                let mut got = totals.count(class) as u64;
                if class == TerrainClass::Unknown {
                    got -= padding;
                }
                prop_assert_eq!(got, expected[class.index()]);
            }
        }

        #[test]
        fn clamp_is_idempotent(x in -1e6f64..1e6) {
            prop_assert_eq!(clamp_cost(clamp_cost(x)), clamp_cost(x));
        }
    }
}
