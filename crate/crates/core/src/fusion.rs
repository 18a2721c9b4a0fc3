//! The three traversability cost maps, their reliability-weighted coupling,
//! and gait selection from the ellipse table.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CostMap, Field, Gait, MapKind, SemanticGrid, TerrainClass, COST_MAX};
use crate::proprio::{ellipse_area, GaitTerrainEllipse};

/// Cost of a moderately traversable terrain, also used for unseen ground.
pub const MODERATE_COST: f64 = 127.0;
/// Norm-to-cost slope of the proprioception map.
pub const PROPRIO_SCALE: f64 = 31.875;
pub const HISTORY_GAIN: f64 = 4.5;
pub const GENERAL_SCALE: f64 = 1.0;
pub const HISTORY_WINDOW_S: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionParams {
    /// Grid cell side in pixels.
    pub n: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub u: f64,
    pub delta: f64,
    /// Norm-to-cost scale for the history map. `None` derives it from the
    /// ellipse table (see [`EllipseTable::norm_cost_scale`]).
    pub kappa: Option<f64>,
    pub history_window: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            n: 40,
            gamma: GENERAL_SCALE,
            alpha: HISTORY_GAIN,
            u: MODERATE_COST,
            delta: PROPRIO_SCALE,
            kappa: None,
            history_window: HISTORY_WINDOW_S,
        }
    }
}

/// Complete (terrain x gait) ellipse table.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipseTable {
    ellipses: BTreeMap<(TerrainClass, Gait), GaitTerrainEllipse>,
}

#[derive(Serialize, Deserialize)]
struct EllipseTableFile {
    records: Vec<GaitTerrainEllipse>,
}

impl EllipseTable {
    pub fn new(ellipses: impl IntoIterator<Item = GaitTerrainEllipse>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for e in ellipses {
            e.validate()?;
            let area = ellipse_area(&e)?;
            if !(area > 0.0) {
                return Err(Error::Degenerate(format!("ellipse ({}, {}) has zero area", e.terrain, e.gait)));
            }
            map.insert((e.terrain, e.gait), e);
        }
        for t in TerrainClass::TERRAINS {
            for g in Gait::ALL {
                if !map.contains_key(&(t, g)) {
                    return Err(Error::MissingEllipse { terrain: t.to_string(), gait: g.to_string() });
                }
            }
        }
        Ok(Self { ellipses: map })
    }

    pub fn ellipse(&self, terrain: TerrainClass, gait: Gait) -> Result<&GaitTerrainEllipse> {
        self.ellipses
            .get(&(terrain, gait))
            .ok_or_else(|| Error::MissingEllipse { terrain: terrain.to_string(), gait: gait.to_string() })
    }

    pub fn area(&self, terrain: TerrainClass, gait: Gait) -> Result<f64> {
        ellipse_area(self.ellipse(terrain, gait)?)
    }

    /// Gait with the smallest ellipse on `terrain`; ties keep gait order.
    pub fn best_gait(&self, terrain: TerrainClass) -> Result<Gait> {
        let mut best = Gait::ALL[0];
        let mut best_area = self.area(terrain, best)?;
        for g in &Gait::ALL[1..] {
            let a = self.area(terrain, *g)?;
            if a < best_area {
                best = *g;
                best_area = a;
            }
        }
        Ok(best)
    }

    pub fn min_area(&self, terrain: TerrainClass) -> Result<f64> {
        self.area(terrain, self.best_gait(terrain)?)
    }

    pub fn iter(&self) -> impl Iterator<Item = &GaitTerrainEllipse> {
        self.ellipses.values()
    }

    /// Ratio of summed best-gait areas to summed best-gait RMS norms.
    ///
    /// Converts a traversability norm into cost units so that a reading typical
    /// of a terrain's own calibration lands just under that terrain's prior cost.
    pub fn norm_cost_scale(&self) -> Result<f64> {
        let mut area = 0.0;
        let mut norm = 0.0;
        for t in TerrainClass::TERRAINS {
            let g = self.best_gait(t)?;
            area += self.area(t, g)?;
            norm += self.ellipse(t, g)?.rms_norm();
        }
        Ok(area / norm)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.ellipses.values().map(|e| {
            let mut e = e.clone();
            for row in &mut e.covariance {
                for v in row.iter_mut() {
                    *v *= factor;
                }
            }
            e
        }))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = EllipseTableFile { records: self.ellipses.values().cloned().collect() };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: EllipseTableFile = serde_json::from_str(text)?;
        Self::new(file.records)
    }
}

fn class_cost(table: &EllipseTable, class: TerrainClass, u: f64) -> Result<f64> {
    match class {
        TerrainClass::Obstacle => Ok(COST_MAX),
        TerrainClass::Unknown => Ok(u),
        t => table.min_area(t),
    }
}

/// Vision prior: per cell, the pixel-averaged best-gait ellipse area.
pub fn general_knowledge_map(grid: &SemanticGrid, table: &EllipseTable, gamma: f64, u: f64) -> Result<CostMap> {
    if !(gamma > 0.0) {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    let mut costs = [0.0; TerrainClass::COUNT];
    for c in TerrainClass::ALL {
        costs[c.index()] = class_cost(table, c, u)?;
    }
    let n2 = (grid.cell_pixels * grid.cell_pixels) as f64;
    let values = grid
        .cells()
        .iter()
        .map(|h| {
            let sum: f64 = TerrainClass::ALL.iter().map(|c| h.count(*c) as f64 * costs[c.index()]).sum();
            gamma / n2 * sum
        })
        .collect();
    CostMap::from_values(grid.width, grid.height, MapKind::General, values)
}

/// Outcome of a gait decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaitDecision {
    pub gait: Gait,
    /// Predominant terrain in the footprint, if any terrain pixel was seen.
    pub predominant: Option<TerrainClass>,
    /// True when nothing was visible and the current gait was kept.
    pub kept: bool,
}

/// Chooses the most stable gait for the predominant terrain over the
/// footprint cells.
pub fn select_gait(
    grid: &SemanticGrid,
    table: &EllipseTable,
    footprint: &[(usize, usize)],
    current: Gait,
) -> Result<GaitDecision> {
    if footprint.is_empty() {
        return Err(Error::InvalidInput("gait footprint is empty".into()));
    }
    let mut hist = crate::grid::ClassHistogram::default();
    for &(r, c) in footprint {
        if r >= grid.height || c >= grid.width {
            return Err(Error::DimensionMismatch(format!("footprint cell ({r}, {c}) outside grid")));
        }
        hist.merge(grid.cell(r, c));
    }
    match hist.terrain_majority() {
        None => Ok(GaitDecision { gait: current, predominant: None, kept: true }),
        Some(t) => Ok(GaitDecision { gait: table.best_gait(t)?, predominant: Some(t), kept: false }),
    }
}

/// Recent traversability readings per terrain class.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryStore {
    window: f64,
    last_t: Option<f64>,
    samples: BTreeMap<TerrainClass, VecDeque<(f64, f64)>>,
}

impl HistoryStore {
    pub fn new(window: f64) -> Self {
        Self { window, last_t: None, samples: BTreeMap::new() }
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    /// Appends a reading and evicts everything older than the window.
    pub fn record(&mut self, terrain: TerrainClass, norm: f64, t: f64) -> Result<()> {
        if let Some(prev) = self.last_t {
            if t < prev {
                return Err(Error::TimeRegression { previous: prev, now: t });
            }
        }
        if !terrain.is_terrain() {
            return Err(Error::InvalidInput(format!("cannot record history for {terrain}")));
        }
        self.last_t = Some(t);
        self.samples.entry(terrain).or_default().push_back((t, norm));
        let cutoff = t - self.window;
        for ring in self.samples.values_mut() {
            while ring.front().is_some_and(|(ts, _)| *ts < cutoff) {
                ring.pop_front();
            }
        }
        self.samples.retain(|_, ring| !ring.is_empty());
        Ok(())
    }

    /// Classes with at least one retained reading.
    pub fn traversed(&self) -> BTreeSet<TerrainClass> {
        self.samples.keys().copied().collect()
    }

    pub fn samples(&self, terrain: TerrainClass) -> impl Iterator<Item = &(f64, f64)> {
        self.samples.get(&terrain).into_iter().flatten()
    }

    pub fn len(&self, terrain: TerrainClass) -> usize {
        self.samples.get(&terrain).map_or(0, VecDeque::len)
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Signed history correction. Cells whose majority class has recent readings
/// get `alpha * sum(kappa * norm - C_g)`; every other cell is zero.
pub fn history_map(
    store: &HistoryStore,
    general: &CostMap,
    grid: &SemanticGrid,
    alpha: f64,
    kappa: f64,
) -> Result<Field> {
    if general.dims() != grid.dims() {
        return Err(Error::DimensionMismatch(format!(
            "general map {:?} vs semantic grid {:?}",
            general.dims(),
            grid.dims()
        )));
    }
    let (w, h) = grid.dims();
    let mut out = Field::zeros(w, h);
    if store.is_empty() {
        return Ok(out);
    }
    // per class: (sample count, sum of scaled norms)
    let mut stats: BTreeMap<TerrainClass, (f64, f64)> = BTreeMap::new();
    for t in store.traversed() {
        let sum: f64 = store.samples(t).map(|(_, n)| kappa * n).sum();
        stats.insert(t, (store.len(t) as f64, sum));
    }
    for r in 0..h {
        for c in 0..w {
            if let Some((count, scaled)) = stats.get(&grid.majority(r, c)) {
                out.set(r, c, alpha * (scaled - count * general.get(r, c)));
            }
        }
    }
    Ok(out)
}

/// Normalized distance of every cell from the bottom-center cell; the
/// farthest cell is 1.
pub fn anchor_distances(width: usize, height: usize) -> Field {
    let ar = (height - 1) as f64;
    let ac = ((width - 1) / 2) as f64;
    let mut max_d = 0.0f64;
    for (r, c) in [(0, 0), (0, width - 1)] {
        max_d = max_d.max((r as f64 - ar).hypot(c as f64 - ac));
    }
    let mut f = Field::zeros(width, height);
    for r in 0..height {
        for c in 0..width {
            let d = (r as f64 - ar).hypot(c as f64 - ac);
            f.set(r, c, if max_d > 0.0 { d / max_d } else { 0.0 });
        }
    }
    f
}

/// Radial extrapolation of the current reading: `(U - delta * norm)(1 - d)`.
pub fn proprioception_map(norm: f64, width: usize, height: usize, u: f64, delta: f64) -> Result<CostMap> {
    if !(u > 0.0 && delta > 0.0) {
        return Err(Error::Config(format!("U and delta must be positive, got {u} and {delta}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput("proprioception map needs non-zero dimensions".into()));
    }
    let d = anchor_distances(width, height);
    let base = u - delta * norm;
    let values = d.values.iter().map(|di| base * (1.0 - di)).collect();
    CostMap::from_values(width, height, MapKind::Proprio, values)
}

fn check_aligned(a: (usize, usize), b: (usize, usize), what: &str) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("{what}: {a:?} vs {b:?}")));
    }
    Ok(())
}

/// `xi * (C_g + C_h) + C_p` before clamping.
pub fn coupled_field(general: &CostMap, history: &Field, proprio: &CostMap, xi: f64) -> Result<Field> {
    check_aligned(general.dims(), history.dims(), "general vs history")?;
    check_aligned(general.dims(), proprio.dims(), "general vs proprioception")?;
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::InvalidInput(format!("reliability {xi} outside [0, 1]")));
    }
    let values = general
        .values()
        .iter()
        .zip(&history.values)
        .zip(proprio.values())
        .map(|((g, h), p)| xi * (g + h) + p)
        .collect();
    Ok(Field { width: general.width(), height: general.height(), values })
}

/// Reliability-weighted coupling of the three maps, clamped to [0, 255].
pub fn couple(general: &CostMap, history: &Field, proprio: &CostMap, xi: f64) -> Result<CostMap> {
    Ok(CostMap::from_field(&coupled_field(general, history, proprio, xi)?, MapKind::Coupled))
}
