//! Calibration assets: the ellipse table and the PCA projection.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fusion::EllipseTable;
use crate::proprio::{PcaModel, DEFAULT_CONFIDENCE};
use crate::sim::truth::{calibrate, TruthModel};

pub const ELLIPSE_FILE: &str = "ellipses.json";
pub const PCA_FILE: &str = "pca.json";
/// Environment variable naming a directory that replaces the bundled assets.
pub const ASSET_DIR_ENV: &str = "AMCO_ASSET_DIR";

pub const CALIBRATION_SAMPLES: usize = 400;
pub const CALIBRATION_SEED: u64 = 2024;
pub const CALIBRATION_NOISE: f64 = 0.02;

const EMBEDDED_ELLIPSES: &str = include_str!("../assets/ellipses.json");
const EMBEDDED_PCA: &str = include_str!("../assets/pca.json");

#[derive(Debug, Clone, PartialEq)]
pub struct Assets {
    pub table: EllipseTable,
    pub pca: PcaModel,
}

impl Assets {
    pub fn embedded() -> Result<Self> {
        Self::parse(EMBEDDED_ELLIPSES, EMBEDDED_PCA)
    }

    pub fn parse(ellipses: &str, pca: &str) -> Result<Self> {
        let table = EllipseTable::from_json(ellipses)?;
        let pca: PcaModel = serde_json::from_str(pca)?;
        if pca.components.iter().any(|c| c.len() != pca.mean.len()) {
            return Err(Error::Parse("pca components do not match the mean length".into()));
        }
        Ok(Self { table, pca })
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<String> {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| Error::Parse(format!("{}: {e}", dir.join(name).display())))
        };
        Self::parse(&read(ELLIPSE_FILE)?, &read(PCA_FILE)?)
    }

    /// Assets from `AMCO_ASSET_DIR` when set, otherwise the bundled ones.
    pub fn load_default() -> Result<Self> {
        match asset_dir_override() {
            Some(dir) => Self::load_dir(&dir),
            None => Self::embedded(),
        }
    }

    /// Runs the calibration traverses with the bundled settings.
    pub fn calibrate_default() -> Result<Self> {
        let cal = calibrate(&TruthModel::new(), CALIBRATION_SAMPLES, CALIBRATION_SEED, CALIBRATION_NOISE, DEFAULT_CONFIDENCE)?;
        Ok(Self { table: cal.table, pca: cal.pca })
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(ELLIPSE_FILE), self.table.to_json()? + "\n")?;
        std::fs::write(dir.join(PCA_FILE), serde_json::to_string_pretty(&self.pca)? + "\n")?;
        Ok(())
    }
}

pub fn asset_dir_override() -> Option<PathBuf> {
    std::env::var_os(ASSET_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}
