//! Browser demo: a synthetic camera frame with its reliability score, the
//! four cost maps for a chosen reading and reliability, and the ellipse table.

use amco_core::assets::Assets;
use amco_core::config::Params;
use amco_core::fusion::{couple, general_knowledge_map, history_map, proprioception_map, HistoryStore};
use amco_core::grid::{discretize_semantic, Gait, Pose, TerrainClass};
use amco_core::reliability::{score_image, ReliabilityScore, WaveletOracle};
use amco_core::sim::{render_camera, Cell, GroundTexture, RenderCache, World};
use amco_core::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Terrain bands ahead of the robot: firm ground, sand, vegetation, mud.
fn demo_world(lighting: f64) -> Result<World> {
    let base = Cell { lighting, ..Cell::default() };
    let mut w = World::new(20, 12, 0.5, base, Pose::new(0.75, 3.0, 0.0), (9.0, 3.0))?;
    for row in 0..w.rows {
        for col in 0..w.cols {
            let (x, y) = w.cell_center(col, row);
            let cell = w.cell_mut(col, row);
            let (terrain, d) = match () {
                _ if x < 1.5 => continue,
                _ if x < 2.5 && y < 3.0 => (TerrainClass::Granular, 0.4),
                _ if x < 2.5 => (TerrainClass::HighResistance, 0.5),
                _ if y > 2.0 => (TerrainClass::PoorFoothold, 0.8),
                _ => continue,
            };
            cell.terrain = terrain;
            cell.deformability = d;
            cell.roughness = 0.3;
        }
    }
    Ok(w)
}

fn robot_pose() -> Pose {
    Pose::new(0.75, 3.0, 0.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    /// RGBA bytes ready for a canvas.
    #[serde(skip)]
    pub rgba: Vec<u8>,
    pub score: ReliabilityScore,
}

/// Renders the demo scene under `lighting` with a horizontal blur of width
/// `blur` and scores the frame.
pub fn camera_frame(lighting: f64, blur: usize, seed: u64) -> Result<Frame> {
    let params = Params::default();
    let world = demo_world(lighting.clamp(0.0, 1.0))?;
    let cache = RenderCache::new(params.camera);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (img, _) = render_camera(&GroundTexture::new(&world), &robot_pose(), &cache, blur.max(1), &mut rng);
    let score = score_image(&img, &WaveletOracle, params.reliability.rho, params.reliability.lambda)?;
    let rgba = img.data.chunks_exact(3).flat_map(|p| [p[0], p[1], p[2], 255]).collect();
    Ok(Frame { width: img.width, height: img.height, rgba, score })
}

#[derive(Debug, Clone, Serialize)]
pub struct Maps {
    pub width: usize,
    pub height: usize,
    /// Majority class per cell, row-major.
    pub classes: Vec<&'static str>,
    pub general: Vec<f64>,
    pub history: Vec<f64>,
    pub proprio: Vec<f64>,
    pub coupled: Vec<f64>,
}

/// Cost maps seen from the robot pose for reading `norm` and reliability
/// `xi`. With `sand_norm` set, one earlier sand reading of that norm feeds
/// the history map.
pub fn cost_maps(norm: f64, xi: f64, sand_norm: Option<f64>) -> Result<Maps> {
    let params = Params::default();
    let f = &params.fusion;
    let assets = Assets::embedded()?;
    let world = demo_world(1.0)?;
    let cache = RenderCache::new(params.camera);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (_, labels) = render_camera(&GroundTexture::new(&world), &robot_pose(), &cache, 1, &mut rng);
    let grid = discretize_semantic(&labels, f.n)?;
    let general = general_knowledge_map(&grid, &assets.table, f.gamma, f.u)?;
    let mut store = HistoryStore::new(f.history_window);
    if let Some(n) = sand_norm {
        store.record(TerrainClass::Granular, n, 0.0)?;
    }
    let kappa = f.kappa.map_or_else(|| assets.table.norm_cost_scale(), Ok)?;
    let history = history_map(&store, &general, &grid, f.alpha, kappa)?;
    let (w, h) = grid.dims();
    let proprio = proprioception_map(norm, w, h, f.u, f.delta)?;
    let coupled = couple(&general, &history, &proprio, xi.clamp(0.0, 1.0))?;
    let classes = (0..h).flat_map(|r| (0..w).map(move |c| (r, c))).map(|(r, c)| grid.majority(r, c).name()).collect();
    Ok(Maps {
        width: w,
        height: h,
        classes,
        general: general.values().to_vec(),
        history: history.values.clone(),
        proprio: proprio.values().to_vec(),
        coupled: coupled.values().to_vec(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EllipseRow {
    pub terrain: &'static str,
    pub gait: &'static str,
    pub area: f64,
    pub center: [f64; 2],
    /// Semi-axes and orientation (rad) of the boundary.
    pub axes: (f64, f64, f64),
    pub best: bool,
}

pub fn ellipse_rows() -> Result<Vec<EllipseRow>> {
    let table = Assets::embedded()?.table;
    let mut rows = Vec::new();
    for t in TerrainClass::TERRAINS {
        let best = table.best_gait(t)?;
        for g in Gait::ALL {
            let e = table.ellipse(t, g)?;
            rows.push(EllipseRow {
                terrain: t.name(),
                gait: g.name(),
                area: table.area(t, g)?,
                center: e.center,
                axes: e.axes(),
                best: g == best,
            });
        }
    }
    Ok(rows)
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Rendered frame; `pixels` holds RGBA bytes, `score` the JSON score record.
#[wasm_bindgen]
pub struct FrameView {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    score: String,
}

#[wasm_bindgen]
impl FrameView {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }

    #[wasm_bindgen(getter)]
    pub fn pixels(&self) -> Vec<u8> {
        self.pixels.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn score(&self) -> String {
        self.score.clone()
    }
}

#[wasm_bindgen(js_name = renderFrame)]
pub fn render_frame(lighting: f64, blur: usize, seed: u32) -> Result<FrameView, JsError> {
    let f = camera_frame(lighting, blur, seed as u64).map_err(js_err)?;
    let score = serde_json::to_string(&f.score).map_err(js_err)?;
    Ok(FrameView { width: f.width, height: f.height, pixels: f.rgba, score })
}

/// JSON of [`Maps`]; a negative `sand_norm` leaves the history empty.
#[wasm_bindgen(js_name = costMaps)]
pub fn cost_maps_json(norm: f64, xi: f64, sand_norm: f64) -> Result<String, JsError> {
    let maps = cost_maps(norm, xi, (sand_norm >= 0.0).then_some(sand_norm)).map_err(js_err)?;
    serde_json::to_string(&maps).map_err(js_err)
}

#[wasm_bindgen(js_name = ellipseTable)]
pub fn ellipse_table_json() -> Result<String, JsError> {
    serde_json::to_string(&ellipse_rows().map_err(js_err)?).map_err(js_err)
}
