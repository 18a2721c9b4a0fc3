use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use amco_core::assets::{Assets, CALIBRATION_NOISE};
use amco_core::fusion::EllipseTable;
use amco_core::grid::{CostMap, Field, Gait, MapKind, TerrainClass};
use amco_core::metrics::{aggregate, MetricsReport, ReferenceJointRange};
use amco_core::reliability::{score_image as score, BlurOracle, ConstantOracle, RgbImage, WaveletOracle};
use amco_core::sim::{calibrate as fit_assets, run_trial_observed, MapsView, Policy, Scenario, SimContext, TrialLog, TruthModel};
use amco_core::Error;
use serde_json::Value;

use crate::overlay::trajectory_svg;
use crate::{CalibrateArgs, Failure, ReportArgs, RunArgs, ScoreArgs};

pub const REFERENCE_FILE: &str = "reference.json";
/// Pixels per grid cell in exported map rasters.
const MAP_SCALE: usize = 8;

fn input(e: impl std::fmt::Display) -> Failure {
    Failure::Input(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Core errors caused by what the user handed in count as input errors.
fn classify(e: Error) -> Failure {
    match e {
        Error::Parse(_) | Error::Json(_) | Error::Config(_) | Error::InvalidInput(_) => Failure::Input(e.to_string()),
        _ => Failure::Runtime(e.to_string()),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

pub fn parse_overrides(items: &[String]) -> Result<Vec<(String, Value)>, Failure> {
    items
        .iter()
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| input(format!("override `{kv}` is not KEY=VALUE")))?;
            let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
            Ok((k.trim().to_string(), value))
        })
        .collect()
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    Scenario::load(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Runs `work` over `items` on `jobs` threads, keeping input order. A panic
/// inside `work` becomes a runtime failure.
fn run_pool<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    work: impl Fn(&T) -> Result<R, Failure> + Sync,
) -> Result<Vec<R>, Failure> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<R, Failure>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = panic::catch_unwind(AssertUnwindSafe(|| work(item)))
                    .unwrap_or_else(|p| {
                        let msg = p
                            .downcast_ref::<String>()
                            .cloned()
                            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                            .unwrap_or_default();
                        Err(Failure::Runtime(format!("trial panicked: {msg}")))
                    });
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every item ran")).collect()
}

/// History values are signed; they are written around mid-gray.
fn history_raster(h: &Field) -> CostMap {
    let shifted = Field { width: h.width, height: h.height, values: h.values.iter().map(|v| 128.0 + v / 2.0).collect() };
    CostMap::from_field(&shifted, MapKind::History)
}

fn write_pgm(path: &Path, map: &CostMap) -> std::io::Result<()> {
    let file = fs::File::create(path)?;
    map.upsample(MAP_SCALE).write_pgm(BufWriter::new(file))
}

/// Writes the four maps of every perception cycle.
struct MapExporter {
    dir: PathBuf,
    error: Option<std::io::Error>,
}

impl MapExporter {
    fn export(&mut self, view: &MapsView<'_>) {
        if self.error.is_some() {
            return;
        }
        let history = history_raster(view.history);
        let maps = [
            (MapKind::General, view.general),
            (MapKind::History, &history),
            (MapKind::Proprio, view.proprio),
            (MapKind::Coupled, view.coupled),
        ];
        for (kind, map) in maps {
            let path = self.dir.join(format!("step_{:05}_{}.pgm", view.step, kind.name()));
            if let Err(e) = write_pgm(&path, map) {
                self.error = Some(e);
                return;
            }
        }
    }
}

pub fn run(a: &RunArgs) -> Result<(), Failure> {
    let overrides = parse_overrides(&a.overrides)?;
    let policies: Vec<Policy> = a.policies.iter().map(|p| p.parse().map_err(input)).collect::<Result<_, _>>()?;
    if policies.is_empty() {
        return Err(input("no policies given"));
    }
    let assets = Assets::load_default().map_err(input)?;
    let mut report = MetricsReport::default();

    for path in &a.scenarios {
        let scenario = load_scenario(path)?;
        let ctx = SimContext::new(scenario, &assets, &overrides).map_err(classify)?;
        let name = ctx.scenario.name.clone();
        let dir = a.out.join(&name);
        write_file(&dir.join(REFERENCE_FILE), serde_json::to_string_pretty(&ctx.reference).map_err(runtime)? + "\n")?;

        let trials = a.trials.unwrap_or(ctx.scenario.trials);
        let base = a.seed.unwrap_or(ctx.scenario.seed);
        let jobs: Vec<(Policy, u64)> =
            policies.iter().flat_map(|&p| (0..trials as u64).map(move |i| (p, base + i))).collect();

        let logs = run_pool(&jobs, a.jobs, |&(policy, seed)| {
            if !a.export_maps {
                return run_trial_observed(&ctx, policy, seed, None).map_err(runtime);
            }
            let maps_dir = dir.join(policy.name()).join(format!("maps_{seed}"));
            fs::create_dir_all(&maps_dir).map_err(|e| runtime(format!("{}: {e}", maps_dir.display())))?;
            let mut exporter = MapExporter { dir: maps_dir, error: None };
            let mut observer = |v: &MapsView<'_>| exporter.export(v);
            let log = run_trial_observed(&ctx, policy, seed, Some(&mut observer)).map_err(runtime)?;
            match exporter.error {
                Some(e) => Err(runtime(format!("writing maps: {e}"))),
                None => Ok(log),
            }
        })?;

        for (&(policy, seed), log) in jobs.iter().zip(&logs) {
            let file = dir.join(policy.name()).join(format!("seed_{seed}.jsonl"));
            write_file(&file, log.to_jsonl().map_err(runtime)?)?;
        }
        for &policy in &policies {
            let own: Vec<TrialLog> =
                jobs.iter().zip(&logs).filter(|(j, _)| j.0 == policy).map(|(_, l)| l.clone()).collect();
            if own.is_empty() {
                continue;
            }
            report.rows.push(aggregate(&own, &ctx.reference).map_err(runtime)?);
            if !a.no_overlay {
                let svg = trajectory_svg(&ctx.world, &own, &format!("{name} / {policy}"));
                write_file(&dir.join(format!("overlay_{}.svg", policy.name())), svg)?;
            }
        }
    }

    write_file(&a.out.join("report.csv"), report.to_csv())?;
    print!("{}", report.to_table());
    Ok(())
}

/// Per terrain, the gaits from smallest to largest ellipse area.
pub fn area_table(table: &EllipseTable) -> Result<String, Error> {
    let mut out = String::new();
    for t in TerrainClass::TERRAINS {
        let mut rows = Vec::new();
        for g in Gait::ALL {
            rows.push((table.area(t, g)?, g));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.push_str(&format!("{t}\n"));
        for (i, (area, g)) in rows.iter().enumerate() {
            let mark = if i == 0 { "  <- best" } else { "" };
            out.push_str(&format!("  {:<6} {area:>10.4}{mark}\n", g.name()));
        }
    }
    Ok(out)
}

pub fn calibrate(a: &CalibrateArgs) -> Result<(), Failure> {
    if a.samples < 3 {
        return Err(input("calibration needs at least 3 samples per pair"));
    }
    if !(a.confidence > 0.0 && a.confidence < 1.0) {
        return Err(input("confidence must lie in (0, 1)"));
    }
    let cal = fit_assets(&TruthModel::new(), a.samples, a.seed, CALIBRATION_NOISE, a.confidence).map_err(runtime)?;
    let assets = Assets { table: cal.table, pca: cal.pca };
    assets.write_dir(&a.out).map_err(|e| runtime(format!("{}: {e}", a.out.display())))?;
    print!("{}", area_table(&assets.table).map_err(runtime)?);
    Ok(())
}

pub fn load_image(path: &Path) -> Result<RgbImage, Failure> {
    let img = image::open(path).map_err(|e| input(format!("{}: {e}", path.display())))?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok(RgbImage { width: w as usize, height: h as usize, data: img.into_raw() })
}

pub fn score_image(a: &ScoreArgs) -> Result<(), Failure> {
    let img = load_image(&a.image)?;
    let oracle: Box<dyn BlurOracle> = match a.oracle.as_str() {
        "wavelet" => Box::new(WaveletOracle),
        other => match other.parse::<f64>() {
            Ok(v) if (0.0..=100.0).contains(&v) => Box::new(ConstantOracle(v)),
            _ => return Err(input(format!("oracle must be `wavelet` or a percentage, got `{other}`"))),
        },
    };
    let params = amco_core::config::Params::default();
    let s = score(&img, oracle.as_ref(), params.reliability.rho, params.reliability.lambda).map_err(classify)?;
    println!("{}", serde_json::to_string(&s).map_err(runtime)?);
    Ok(())
}

fn find_reference(log: &Path, cache: &mut BTreeMap<PathBuf, ReferenceJointRange>) -> Result<ReferenceJointRange, Failure> {
    for dir in log.ancestors().skip(1) {
        let candidate = dir.join(REFERENCE_FILE);
        if let Some(r) = cache.get(&candidate) {
            return Ok(r.clone());
        }
        if candidate.is_file() {
            let text = fs::read_to_string(&candidate).map_err(|e| input(format!("{}: {e}", candidate.display())))?;
            let r: ReferenceJointRange =
                serde_json::from_str(&text).map_err(|e| input(format!("{}: {e}", candidate.display())))?;
            cache.insert(candidate, r.clone());
            return Ok(r);
        }
    }
    Err(input(format!("no {REFERENCE_FILE} above {}", log.display())))
}

pub fn report(a: &ReportArgs) -> Result<(), Failure> {
    let mut files = Vec::new();
    for root in &a.inputs {
        if !root.exists() {
            return Err(input(format!("{}: no such file or directory", root.display())));
        }
        for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(input)?;
            if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "jsonl") {
                files.push(entry.into_path());
            }
        }
    }
    if files.is_empty() {
        return Err(input("no trial logs found"));
    }
    let mut references = BTreeMap::new();
    let mut groups: BTreeMap<(String, Policy), (ReferenceJointRange, Vec<TrialLog>)> = BTreeMap::new();
    for f in &files {
        let text = fs::read_to_string(f).map_err(|e| input(format!("{}: {e}", f.display())))?;
        let log = TrialLog::from_jsonl(&text).map_err(|e| input(format!("{}: {e}", f.display())))?;
        let reference = find_reference(f, &mut references)?;
        groups
            .entry((log.summary.scenario.clone(), log.summary.policy))
            .or_insert_with(|| (reference, Vec::new()))
            .1
            .push(log);
    }
    let mut report = MetricsReport::default();
    for (_, (reference, mut logs)) in groups {
        logs.sort_by_key(|l| l.summary.seed);
        report.rows.push(aggregate(&logs, &reference).map_err(runtime)?);
    }
    if let Some(path) = &a.csv {
        write_file(path, report.to_csv())?;
    }
    print!("{}", report.to_table());
    Ok(())
}
