//! On-disk dataset layout: a directory of GRD1 rasters plus a newline
//! manifest of `date,lr_path,hr_path` records and one `elevation.grd`.

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use downscale_core::data::{load_grid, save_grid, GridField, PairedSample, SyntheticDataset};
use std::path::{Path, PathBuf};

pub const DATA_MANIFEST: &str = "manifest.csv";
pub const ELEVATION_FILE: &str = "elevation.grd";

pub struct DiskDataset {
    pub samples: Vec<PairedSample>,
    pub elevation: GridField,
}

pub fn write_dataset(dir: &Path, ds: &SyntheticDataset) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut manifest = String::new();
    for s in &ds.samples {
        let lr_name = format!("lr_{}.grd", s.date);
        let hr_name = format!("hr_{}.grd", s.date);
        save_grid(&s.x_lr, &dir.join(&lr_name))?;
        save_grid(&s.y_hr, &dir.join(&hr_name))?;
        manifest.push_str(&format!("{},{lr_name},{hr_name}\n", s.date));
        written.push(dir.join(lr_name));
        written.push(dir.join(hr_name));
    }
    save_grid(&ds.elevation, &dir.join(ELEVATION_FILE))?;
    written.push(dir.join(ELEVATION_FILE));
    std::fs::write(dir.join(DATA_MANIFEST), manifest)?;
    written.push(dir.join(DATA_MANIFEST));
    Ok(written)
}

pub fn load_dataset(dir: &Path) -> Result<DiskDataset> {
    let manifest_path = dir.join(DATA_MANIFEST);
    let text = std::fs::read_to_string(&manifest_path)
        .with_context(|| format!("reading {}", manifest_path.display()))?;
    let mut samples = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 3 {
            bail!("{}:{}: expected date,lr_path,hr_path", manifest_path.display(), ln + 1);
        }
        let date: NaiveDate = cells[0]
            .parse()
            .with_context(|| format!("{}:{}: bad date {}", manifest_path.display(), ln + 1, cells[0]))?;
        let x_lr = load_grid(&dir.join(cells[1]))?;
        let y_hr = load_grid(&dir.join(cells[2]))?;
        samples.push(PairedSample { x_lr, y_hr, date });
    }
    if samples.is_empty() {
        bail!("{} lists no samples", manifest_path.display());
    }
    let elevation = load_grid(&dir.join(ELEVATION_FILE))
        .with_context(|| format!("loading {}", dir.join(ELEVATION_FILE).display()))?;
    Ok(DiskDataset { samples, elevation })
}
