use crate::commands::{parse_pair, parse_range, parse_shape};
use crate::config_file::FileConfig;
use crate::dataset::write_dataset;
use crate::manifest::ManifestBuilder;
use crate::SynthArgs;
use anyhow::{Context, Result};
use chrono::NaiveDate;
use downscale_core::data::{generate_synthetic, SynthConfig};

pub fn run(args: SynthArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let defaults = SynthConfig::default();
    let lr_shape = parse_shape(&file.resolve(args.lr_shape, "lr_shape", "14x9".into())?)?;
    let hr_shape = parse_shape(&file.resolve(args.hr_shape, "hr_shape", "66x41".into())?)?;
    let displacement = parse_pair(&file.resolve(args.displacement, "displacement", "3,2".into())?)?;
    let cells = parse_range(&file.resolve(args.cells, "cells", "1-4".into())?)?;
    let cfg = SynthConfig {
        seed: file.resolve(args.seed, "seed", defaults.seed)?,
        n_days: file.resolve(args.days, "days", defaults.n_days)?,
        lr_shape,
        hr_shape,
        cells_min: cells.0,
        cells_max: cells.1,
        orographic_gain: file.resolve(args.gain, "gain", defaults.orographic_gain)?,
        wet_bias: file.resolve(args.wet_bias, "wet_bias", defaults.wet_bias)?,
        displacement,
        smoothing_radius: file.resolve(args.smooth, "smooth", defaults.smoothing_radius)?,
        dry_day_prob: file.resolve(args.dry_prob, "dry_prob", defaults.dry_day_prob)?,
        start_date: file.resolve::<NaiveDate>(args.start_date, "start_date", defaults.start_date)?,
    };
    let config_text = format!(
        "command=synth\nseed={}\ndays={}\nlr_shape={}x{}\nhr_shape={}x{}\ncells={}-{}\n\
         gain={}\nwet_bias={}\ndisplacement={},{}\nsmooth={}\ndry_prob={}\nstart_date={}\n",
        cfg.seed,
        cfg.n_days,
        cfg.lr_shape.0,
        cfg.lr_shape.1,
        cfg.hr_shape.0,
        cfg.hr_shape.1,
        cfg.cells_min,
        cfg.cells_max,
        cfg.orographic_gain,
        cfg.wet_bias,
        cfg.displacement.0,
        cfg.displacement.1,
        cfg.smoothing_radius,
        cfg.dry_day_prob,
        cfg.start_date,
    );
    let mut manifest = ManifestBuilder::new("synth", config_text, cfg.seed);

    let ds = generate_synthetic(&cfg).context("generating synthetic dataset")?;
    let written = write_dataset(&args.out, &ds)?;
    for p in &written {
        manifest.artifact(p);
    }
    manifest.write(&args.out)?;
    println!(
        "wrote {} days ({}x{} -> {}x{}) to {}",
        cfg.n_days, cfg.lr_shape.0, cfg.lr_shape.1, cfg.hr_shape.0, cfg.hr_shape.1,
        args.out.display()
    );
    Ok(())
}
