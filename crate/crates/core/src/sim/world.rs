//! Terrain grid worlds and their JSON scenario files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::grid::{Pose, TerrainClass};
use crate::planner::Obstacle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub terrain: TerrainClass,
    pub deformability: f64,
    #[serde(default)]
    pub obstacle: bool,
    pub lighting: f64,
    pub roughness: f64,
}

impl Default for Cell {
    fn default() -> Self {
        Self { terrain: TerrainClass::Stable, deformability: 0.0, obstacle: false, lighting: 1.0, roughness: 0.1 }
    }
}

/// Partial cell update; absent fields keep their current value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellPatch {
    pub terrain: Option<TerrainClass>,
    pub deformability: Option<f64>,
    pub obstacle: Option<bool>,
    pub lighting: Option<f64>,
    pub roughness: Option<f64>,
}

impl CellPatch {
    fn apply(&self, cell: &mut Cell) {
        if let Some(t) = self.terrain {
            cell.terrain = t;
        }
        if let Some(d) = self.deformability {
            cell.deformability = d;
        }
        if let Some(o) = self.obstacle {
            cell.obstacle = o;
        }
        if let Some(l) = self.lighting {
            cell.lighting = l;
        }
        if let Some(r) = self.roughness {
            cell.roughness = r;
        }
    }
}

/// Region painter applied in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    /// Cells whose centers fall inside the axis-aligned box `[min, max]` (m).
    Rect { min: [f64; 2], max: [f64; 2], set: CellPatch },
    /// Cells whose centers fall within `radius` of `center` (m).
    Disc { center: [f64; 2], radius: f64, set: CellPatch },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    /// Columns (x) and rows (y).
    pub grid: [usize; 2],
    pub cell_size: f64,
    #[serde(default)]
    pub base: Cell,
    /// Optional character map, first string is the northernmost row.
    #[serde(default)]
    pub rows: Option<Vec<String>>,
    #[serde(default)]
    pub legend: BTreeMap<char, CellPatch>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    pub start: Pose,
    pub goal: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    /// Trial time limit, s.
    pub time: f64,
    pub goal_radius: f64,
    #[serde(default)]
    pub theta_fail: Option<f64>,
    #[serde(default)]
    pub sinkage_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub world: WorldSpec,
    pub trials: usize,
    pub seed: u64,
    pub limits: Limits,
    /// Dotted parameter overrides, e.g. `"sim.drift": 2.0`.
    #[serde(default)]
    pub overrides: BTreeMap<String, Value>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))?;
        s.build_world()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn build_world(&self) -> Result<World> {
        World::from_spec(&self.world)
    }
}

/// Rasterized world. Cell `(col, row)` covers
/// `[col * size, (col + 1) * size) x [row * size, (row + 1) * size)`.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub cols: usize,
    pub rows: usize,
    pub cell_size: f64,
    cells: Vec<Cell>,
    pub start: Pose,
    pub goal: (f64, f64),
}

impl World {
    pub fn new(cols: usize, rows: usize, cell_size: f64, fill: Cell, start: Pose, goal: (f64, f64)) -> Result<Self> {
        let w = Self { cols, rows, cell_size, cells: vec![fill; cols * rows], start, goal };
        w.validate()?;
        Ok(w)
    }

    pub fn from_spec(spec: &WorldSpec) -> Result<Self> {
        let [cols, rows] = spec.grid;
        if cols == 0 || rows == 0 || !(spec.cell_size > 0.0) {
            return Err(Error::Parse("world.grid and world.cell_size must be positive".into()));
        }
        let mut w = Self {
            cols,
            rows,
            cell_size: spec.cell_size,
            cells: vec![spec.base; cols * rows],
            start: Pose::new(spec.start.x, spec.start.y, spec.start.theta),
            goal: (spec.goal[0], spec.goal[1]),
        };
        if let Some(lines) = &spec.rows {
            if lines.len() != rows {
                return Err(Error::Parse(format!("world.rows has {} lines, grid has {rows} rows", lines.len())));
            }
            for (k, line) in lines.iter().enumerate() {
                let row = rows - 1 - k;
                let chars: Vec<char> = line.chars().collect();
                if chars.len() != cols {
                    return Err(Error::Parse(format!("world.rows[{k}] has {} columns, expected {cols}", chars.len())));
                }
                for (col, ch) in chars.into_iter().enumerate() {
                    if ch == '.' {
                        continue;
                    }
                    let patch = spec
                        .legend
                        .get(&ch)
                        .ok_or_else(|| Error::Parse(format!("world.rows[{k}]: `{ch}` is not in world.legend")))?;
                    patch.apply(&mut w.cells[row * cols + col]);
                }
            }
        }
        for (gi, g) in spec.generators.iter().enumerate() {
            let (patch, inside): (&CellPatch, Box<dyn Fn(f64, f64) -> bool>) = match g {
                Generator::Rect { min, max, set } => {
                    let (min, max) = (*min, *max);
                    if min[0] > max[0] || min[1] > max[1] {
                        return Err(Error::Parse(format!("world.generators[{gi}]: rect min exceeds max")));
                    }
                    (set, Box::new(move |x, y| x >= min[0] && x <= max[0] && y >= min[1] && y <= max[1]))
                }
                Generator::Disc { center, radius, set } => {
                    let (c, r) = (*center, *radius);
                    if !(r > 0.0) {
                        return Err(Error::Parse(format!("world.generators[{gi}]: disc radius must be positive")));
                    }
                    (set, Box::new(move |x, y| (x - c[0]).hypot(y - c[1]) <= r))
                }
            };
            for row in 0..rows {
                for col in 0..cols {
                    let (x, y) = w.cell_center(col, row);
                    if inside(x, y) {
                        patch.apply(&mut w.cells[row * cols + col]);
                    }
                }
            }
        }
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.cells.iter().enumerate() {
            let at = || format!("cell ({}, {})", i % self.cols, i / self.cols);
            if !c.terrain.is_terrain() {
                return Err(Error::Parse(format!("{}: terrain must be a traversable class, got {}", at(), c.terrain)));
            }
            for (name, v) in [("deformability", c.deformability), ("lighting", c.lighting), ("roughness", c.roughness)] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Parse(format!("{}: {name} {v} outside [0, 1]", at())));
                }
            }
            if c.terrain == TerrainClass::Stable && c.deformability != 0.0 {
                return Err(Error::Parse(format!("{}: stable ground cannot be deformable", at())));
            }
        }
        for (what, (x, y)) in [("start", (self.start.x, self.start.y)), ("goal", self.goal)] {
            match self.cell_at(x, y) {
                None => return Err(Error::Parse(format!("{what} ({x}, {y}) lies outside the world"))),
                Some(c) if c.obstacle => return Err(Error::Parse(format!("{what} ({x}, {y}) lies on an obstacle"))),
                _ => {}
            }
        }
        if self.start.distance_to(self.goal.0, self.goal.1) == 0.0 {
            return Err(Error::Parse("start and goal coincide".into()));
        }
        Ok(())
    }

    pub fn width_m(&self) -> f64 {
        self.cols as f64 * self.cell_size
    }

    pub fn height_m(&self) -> f64 {
        self.rows as f64 * self.cell_size
    }

    pub fn cell(&self, col: usize, row: usize) -> &Cell {
        &self.cells[row * self.cols + col]
    }

    pub fn cell_mut(&mut self, col: usize, row: usize) -> &mut Cell {
        &mut self.cells[row * self.cols + col]
    }

    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        ((col as f64 + 0.5) * self.cell_size, (row as f64 + 0.5) * self.cell_size)
    }

    pub fn index_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !(x >= 0.0 && y >= 0.0) {
            return None;
        }
        let col = (x / self.cell_size) as usize;
        let row = (y / self.cell_size) as usize;
        (col < self.cols && row < self.rows).then_some((col, row))
    }

    pub fn cell_at(&self, x: f64, y: f64) -> Option<&Cell> {
        self.index_of(x, y).map(|(c, r)| self.cell(c, r))
    }

    /// Obstacle cells within `range` of `(x, y)` as circumscribing discs.
    pub fn obstacles_near(&self, x: f64, y: f64, range: f64) -> Vec<Obstacle> {
        let radius = self.cell_size * std::f64::consts::FRAC_1_SQRT_2;
        let span = ((range + radius) / self.cell_size).ceil() as isize + 1;
        let (cc, cr) = ((x / self.cell_size).floor() as isize, (y / self.cell_size).floor() as isize);
        let mut out = Vec::new();
        for row in (cr - span).max(0)..=(cr + span).min(self.rows as isize - 1) {
            for col in (cc - span).max(0)..=(cc + span).min(self.cols as isize - 1) {
                let (col, row) = (col as usize, row as usize);
                if self.cell(col, row).obstacle {
                    let (ox, oy) = self.cell_center(col, row);
                    if (ox - x).hypot(oy - y) - radius <= range {
                        out.push(Obstacle { x: ox, y: oy, radius });
                    }
                }
            }
        }
        out
    }

    /// Lighting and roughness of the first stable, obstacle-free cell, used
    /// for the joint reference run.
    pub fn reference_cell(&self) -> Cell {
        self.cells
            .iter()
            .find(|c| c.terrain == TerrainClass::Stable && !c.obstacle)
            .copied()
            .unwrap_or_default()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }
}
