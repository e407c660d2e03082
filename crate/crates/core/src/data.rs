//! Gridded raster I/O (the GRD1 container), the preprocessing chain,
//! terrain utilities, dataset splitting, and a synthetic generator that
//! produces heterogeneous low/high-resolution precipitation pairs with a
//! controllable bias model (displacement, multiplicative wet bias,
//! smoothing) over a seeded island-like terrain.

use crate::error::{Error, Result};
use chrono::{Datelike, NaiveDate};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Units tag carried in the GRD1 header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Units {
    MmPerDay,
    Meters,
    Log1pMm,
    PerMeter,
    Other(String),
}

impl Units {
    pub fn parse(s: &str) -> Units {
        match s {
            "mm_day" => Units::MmPerDay,
            "m" => Units::Meters,
            "log1p_mm" => Units::Log1pMm,
            "per_m" => Units::PerMeter,
            other => Units::Other(other.to_string()),
        }
    }
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Units::MmPerDay => write!(f, "mm_day"),
            Units::Meters => write!(f, "m"),
            Units::Log1pMm => write!(f, "log1p_mm"),
            Units::PerMeter => write!(f, "per_m"),
            Units::Other(s) => write!(f, "{s}"),
        }
    }
}

/// Georeferenced 2-D raster with a validity mask. Row `i`, column `j` sits
/// at `(lat0 + i*dlat, lon0 + j*dlon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub height: usize,
    pub width: usize,
    pub lat0: f64,
    pub lon0: f64,
    pub dlat: f64,
    pub dlon: f64,
    pub values: Vec<f32>,
    pub mask: Vec<bool>,
    pub units: Units,
}

impl GridField {
    pub fn new(
        height: usize,
        width: usize,
        georef: (f64, f64, f64, f64),
        values: Vec<f32>,
        mask: Vec<bool>,
        units: Units,
    ) -> Result<Self> {
        if values.len() != height * width || mask.len() != height * width {
            return Err(Error::GridMismatch(format!(
                "{}x{} grid with {} values / {} mask entries",
                height,
                width,
                values.len(),
                mask.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { op: "grid" });
        }
        let (lat0, lon0, dlat, dlon) = georef;
        Ok(GridField {
            height,
            width,
            lat0,
            lon0,
            dlat,
            dlon,
            values,
            mask,
            units,
        })
    }

    /// All-valid grid of the given shape with zeroed georeference steps of 1.
    pub fn from_values(height: usize, width: usize, values: Vec<f32>, units: Units) -> Result<Self> {
        let mask = vec![true; height * width];
        GridField::new(height, width, (0.0, 0.0, 1.0, 1.0), values, mask, units)
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + j
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.values[self.idx(i, j)]
    }

    pub fn same_grid(&self, other: &GridField) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn land_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

// ---- GRD1 container -------------------------------------------------------

/// Write a field in GRD1: one ASCII header line, `h*w` little-endian f32
/// values, then `h*w` mask bytes.
pub fn save_grid(field: &GridField, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(64 + field.values.len() * 5);
    write!(
        out,
        "GRD1 {} {} {} {} {} {} {}\n",
        field.height, field.width, field.lat0, field.lon0, field.dlat, field.dlon, field.units
    )?;
    for v in &field.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(field.mask.iter().map(|&m| u8::from(m)));
    fs::write(path, out)?;
    Ok(())
}

/// Read a GRD1 file; parse failures name the byte offset.
pub fn load_grid(path: &Path) -> Result<GridField> {
    let bytes = fs::read(path)?;
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or(Error::Parse {
        offset: bytes.len(),
        detail: "missing header newline".into(),
    })?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|e| Error::Parse {
        offset: e.valid_up_to(),
        detail: "header is not UTF-8".into(),
    })?;
    let fields: Vec<&str> = header.split(' ').collect();
    if fields.len() != 8 || fields[0] != "GRD1" {
        return Err(Error::Parse {
            offset: 0,
            detail: format!("bad magic or header field count in {header:?}"),
        });
    }
    let height: usize = parse_field(fields[1], 5)?;
    let width: usize = parse_field(fields[2], 5)?;
    let lat0: f64 = parse_field(fields[3], 5)?;
    let lon0: f64 = parse_field(fields[4], 5)?;
    let dlat: f64 = parse_field(fields[5], 5)?;
    let dlon: f64 = parse_field(fields[6], 5)?;
    let units = Units::parse(fields[7]);

    let n = height * width;
    let values_at = nl + 1;
    let mask_at = values_at + 4 * n;
    let end = mask_at + n;
    if bytes.len() < end {
        return Err(Error::Parse {
            offset: bytes.len(),
            detail: format!("truncated: need {end} bytes for a {height}x{width} grid"),
        });
    }
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let at = values_at + 4 * i;
        let v = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Parse {
                offset: at,
                detail: format!("non-finite payload value {v}"),
            });
        }
        values.push(v);
    }
    let mask = bytes[mask_at..end].iter().map(|&b| b != 0).collect();
    GridField::new(height, width, (lat0, lon0, dlat, dlon), values, mask, units)
}

fn parse_field<T: std::str::FromStr>(s: &str, offset: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        offset,
        detail: format!("bad header field {s:?}"),
    })
}

// ---- preprocessing -----------------------------------------------------------

/// Geographic bounding box; cells whose centers fall inside are kept.
#[derive(Debug, Clone, Copy)]
pub struct CropBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

/// Inclusive index range of coordinates `c0 + i*dc` lying in `[lo, hi]`.
fn crop_range(n: usize, c0: f64, dc: f64, lo: f64, hi: f64) -> Result<(usize, usize)> {
    let mut first = None;
    let mut last = None;
    for i in 0..n {
        let c = c0 + i as f64 * dc;
        if c >= lo - 1e-9 && c <= hi + 1e-9 {
            if first.is_none() {
                first = Some(i);
            }
            last = Some(i);
        }
    }
    match (first, last) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::Config(format!(
            "bounding box [{lo}, {hi}] outside raster starting at {c0} step {dc}"
        ))),
    }
}

fn crop_field(raw: &GridField, bbox: &CropBox) -> Result<GridField> {
    let (i0, i1) = crop_range(raw.height, raw.lat0, raw.dlat, bbox.lat_min, bbox.lat_max)?;
    let (j0, j1) = crop_range(raw.width, raw.lon0, raw.dlon, bbox.lon_min, bbox.lon_max)?;
    let (h, w) = (i1 - i0 + 1, j1 - j0 + 1);
    let mut values = Vec::with_capacity(h * w);
    let mut mask = Vec::with_capacity(h * w);
    for i in i0..=i1 {
        for j in j0..=j1 {
            values.push(raw.get(i, j));
            mask.push(raw.mask[raw.idx(i, j)]);
        }
    }
    GridField::new(
        h,
        w,
        (
            raw.lat0 + i0 as f64 * raw.dlat,
            raw.lon0 + j0 as f64 * raw.dlon,
            raw.dlat,
            raw.dlon,
        ),
        values,
        mask,
        raw.units.clone(),
    )
}

/// Convert a daily-mean source field in meters of water to mm/day and crop
/// to the configured box.
pub fn preprocess_lr(raw: &GridField, bbox: &CropBox) -> Result<GridField> {
    if raw.units != Units::Meters {
        return Err(Error::Config(format!(
            "low-resolution source must be in meters, got {}",
            raw.units
        )));
    }
    let mut cropped = crop_field(raw, bbox)?;
    for v in &mut cropped.values {
        *v *= 1e3;
    }
    cropped.units = Units::MmPerDay;
    Ok(cropped)
}

/// Zero out sea points, mask them invalid, and crop to the configured box
/// (nearest-neighbor alignment: the cell whose center falls in the box).
pub fn preprocess_hr(raw: &GridField, bbox: &CropBox) -> Result<GridField> {
    let mut cropped = crop_field(raw, bbox)?;
    for (v, &m) in cropped.values.iter_mut().zip(&cropped.mask) {
        if !m {
            *v = 0.0;
        }
    }
    Ok(cropped)
}

/// log1p-transform a nonnegative field.
pub fn normalize(field: &GridField) -> Result<GridField> {
    if let Some(&bad) = field.values.iter().find(|&&v| v < 0.0) {
        return Err(Error::Domain {
            op: "normalize",
            detail: format!("negative value {bad}"),
        });
    }
    let mut out = field.clone();
    for v in &mut out.values {
        *v = f64::from(*v).ln_1p() as f32;
    }
    out.units = Units::Log1pMm;
    Ok(out)
}

/// Inverse of [`normalize`]: expm1, with tiny negative round-off clamped.
pub fn denormalize(field: &GridField) -> GridField {
    let mut out = field.clone();
    for v in &mut out.values {
        *v = f64::from(*v).exp_m1().max(0.0) as f32;
    }
    out.units = Units::MmPerDay;
    out
}

/// Mask points below sea level and zero them.
pub fn mask_elevation(terrain: &GridField) -> GridField {
    let mut out = terrain.clone();
    for (v, m) in out.values.iter_mut().zip(out.mask.iter_mut()) {
        if *v < 0.0 {
            *v = 0.0;
            *m = false;
        }
    }
    out
}

/// Terrain divergence: sqrt(slope_x^2 + slope_y^2) per point, central
/// differences inside, one-sided at borders. Spacing in meters.
pub fn terrain_divergence(terrain: &GridField, dy_m: f64, dx_m: f64) -> Result<GridField> {
    let (h, w) = (terrain.height, terrain.width);
    if h < 2 || w < 2 {
        return Err(Error::Config(format!("degenerate {h}x{w} grid")));
    }
    let v = &terrain.values;
    let mut out = vec![0.0f32; h * w];
    for i in 0..h {
        for j in 0..w {
            let sy = match i {
                0 => (f64::from(v[w + j]) - f64::from(v[j])) / dy_m,
                _ if i == h - 1 => {
                    (f64::from(v[i * w + j]) - f64::from(v[(i - 1) * w + j])) / dy_m
                }
                _ => (f64::from(v[(i + 1) * w + j]) - f64::from(v[(i - 1) * w + j])) / (2.0 * dy_m),
            };
            let sx = match j {
                0 => (f64::from(v[i * w + 1]) - f64::from(v[i * w])) / dx_m,
                _ if j == w - 1 => {
                    (f64::from(v[i * w + j]) - f64::from(v[i * w + j - 1])) / dx_m
                }
                _ => (f64::from(v[i * w + j + 1]) - f64::from(v[i * w + j - 1])) / (2.0 * dx_m),
            };
            out[i * w + j] = (sy * sy + sx * sx).sqrt() as f32;
        }
    }
    GridField::new(
        h,
        w,
        (terrain.lat0, terrain.lon0, terrain.dlat, terrain.dlon),
        out,
        terrain.mask.clone(),
        Units::PerMeter,
    )
}

// ---- resizing helpers -----------------------------------------------------------

/// Bilinear resize between arbitrary grid shapes (align-corners-false,
/// edge-clamped), computed in f64.
pub fn resize_bilinear(values: &[f32], from: (usize, usize), to: (usize, usize)) -> Vec<f32> {
    let (h, w) = from;
    let (hh, ww) = to;
    let taps = |out_len: usize, in_len: usize| -> Vec<(usize, usize, f64)> {
        (0..out_len)
            .map(|o| {
                let src = (o as f64 + 0.5) * in_len as f64 / out_len as f64 - 0.5;
                let base = src.floor();
                let t = src - base;
                let i0 = (base as isize).clamp(0, in_len as isize - 1) as usize;
                let i1 = (base as isize + 1).clamp(0, in_len as isize - 1) as usize;
                (i0, i1, t)
            })
            .collect()
    };
    let rows = taps(hh, h);
    let cols = taps(ww, w);
    let mut out = vec![0.0f32; hh * ww];
    for (oi, &(r0, r1, tr)) in rows.iter().enumerate() {
        for (oj, &(c0, c1, tc)) in cols.iter().enumerate() {
            let v00 = f64::from(values[r0 * w + c0]);
            let v01 = f64::from(values[r0 * w + c1]);
            let v10 = f64::from(values[r1 * w + c0]);
            let v11 = f64::from(values[r1 * w + c1]);
            let top = v00 * (1.0 - tc) + v01 * tc;
            let bot = v10 * (1.0 - tc) + v11 * tc;
            out[oi * ww + oj] = (top * (1.0 - tr) + bot * tr) as f32;
        }
    }
    out
}

/// Block-mean coarsening with ragged edge blocks: row block `i` covers
/// `[i*h/lh, (i+1)*h/lh)`.
pub fn degrade_to(values: &[f32], from: (usize, usize), to: (usize, usize)) -> Result<Vec<f32>> {
    let (h, w) = from;
    let (lh, lw) = to;
    if lh == 0 || lw == 0 || lh > h || lw > w {
        return Err(Error::GridMismatch(format!(
            "cannot degrade {h}x{w} to {lh}x{lw}"
        )));
    }
    let mut out = vec![0.0f32; lh * lw];
    for bi in 0..lh {
        let r0 = bi * h / lh;
        let r1 = (bi + 1) * h / lh;
        for bj in 0..lw {
            let c0 = bj * w / lw;
            let c1 = (bj + 1) * w / lw;
            let mut acc = 0.0f64;
            for i in r0..r1 {
                for j in c0..c1 {
                    acc += f64::from(values[i * w + j]);
                }
            }
            out[bi * lw + bj] = (acc / ((r1 - r0) * (c1 - c0)) as f64) as f32;
        }
    }
    Ok(out)
}

// ---- dataset types ----------------------------------------------------------------

/// One training day: biased low-resolution input paired with the
/// high-resolution truth covering the same box.
#[derive(Debug, Clone)]
pub struct PairedSample {
    pub x_lr: GridField,
    pub y_hr: GridField,
    pub date: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: (usize, usize),
    pub val: (usize, usize),
    pub test: (usize, usize),
}

/// Random 80/10/10 split, deterministic under `seed`.
pub fn split_indices(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    if n < 10 {
        return Err(Error::Config(format!("need at least 10 samples, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let n_train = n * 8 / 10;
    let n_val = n / 10;
    let train = order[..n_train].to_vec();
    let val = order[n_train..n_train + n_val].to_vec();
    let test = order[n_train + n_val..].to_vec();
    Ok((train, val, test))
}

/// Random 80/10/10 split of owned samples.
pub fn split(
    dataset: &[PairedSample],
    seed: u64,
) -> Result<(Vec<PairedSample>, Vec<PairedSample>, Vec<PairedSample>)> {
    let (a, b, c) = split_indices(dataset.len(), seed)?;
    let take = |idx: Vec<usize>| idx.into_iter().map(|i| dataset[i].clone()).collect();
    Ok((take(a), take(b), take(c)))
}

// ---- synthetic generator ------------------------------------------------------------

/// Controls for the synthetic heterogeneous-pair generator.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_days: usize,
    /// (rows, cols) of the low-resolution input.
    pub lr_shape: (usize, usize),
    /// (rows, cols) of the high-resolution truth.
    pub hr_shape: (usize, usize),
    pub cells_min: usize,
    pub cells_max: usize,
    /// Multiplier strength of terrain on rainfall (0 disables orography).
    pub orographic_gain: f64,
    /// Multiplicative wet bias applied to the low-resolution source.
    pub wet_bias: f64,
    /// Rain-pattern displacement of the biased copy, in high-res cells.
    pub displacement: (isize, isize),
    /// Gaussian smoothing sigma of the biased copy, in high-res cells.
    pub smoothing_radius: f64,
    pub dry_day_prob: f64,
    pub start_date: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_days: 400,
            lr_shape: (14, 9),
            hr_shape: (66, 41),
            cells_min: 1,
            cells_max: 4,
            orographic_gain: 0.8,
            wet_bias: 1.8,
            displacement: (3, 2),
            smoothing_radius: 1.0,
            dry_day_prob: 0.25,
            start_date: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (lh, lw) = self.lr_shape;
        let (hh, hw) = self.hr_shape;
        if self.n_days == 0 || lh < 2 || lw < 2 || hh < lh || hw < lw {
            return Err(Error::Config(format!(
                "bad shapes: lr {lh}x{lw}, hr {hh}x{hw}, {} days",
                self.n_days
            )));
        }
        let aspect_hr = hh as f64 / hw as f64;
        let aspect_lr = lh as f64 / lw as f64;
        if (aspect_hr / aspect_lr - 1.0).abs() > 0.25 {
            return Err(Error::Config(format!(
                "hr/lr aspect ratios diverge: {aspect_hr:.2} vs {aspect_lr:.2}"
            )));
        }
        if self.wet_bias <= 0.0 || !(0.0..=1.0).contains(&self.dry_day_prob) {
            return Err(Error::Config("wet_bias must be > 0, dry_day_prob in [0,1]".into()));
        }
        if self.cells_min == 0 || self.cells_min > self.cells_max {
            return Err(Error::Config("need 1 <= cells_min <= cells_max".into()));
        }
        if self.smoothing_radius < 0.0 || self.orographic_gain < 0.0 {
            return Err(Error::Config("smoothing and gain must be nonnegative".into()));
        }
        Ok(())
    }

    /// Generation happens on a canvas of exactly `factor * lr_shape`; the
    /// truth is the canvas center crop.
    pub fn factor(&self) -> usize {
        let fr = self.hr_shape.0.div_ceil(self.lr_shape.0);
        let fc = self.hr_shape.1.div_ceil(self.lr_shape.1);
        fr.max(fc)
    }

    pub fn canvas_shape(&self) -> (usize, usize) {
        let f = self.factor();
        (self.lr_shape.0 * f, self.lr_shape.1 * f)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub samples: Vec<PairedSample>,
    /// Terrain on the high-resolution grid, meters, sea masked by sign.
    pub elevation: GridField,
}

/// Island-like terrain on the canvas: a meandering north-south ridge with
/// seeded bumps, negative (sea) around the edges.
fn synth_elevation(cfg: &SynthConfig) -> Vec<f32> {
    let (ch, cw) = cfg.canvas_shape();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7E11_AB1E);
    let amp = 3200.0 + rng.gen_range(-300.0..300.0);
    let ridge_width = cw as f64 * rng.gen_range(0.14..0.2);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let sea = amp * 0.22;
    let bumps: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(0.2..0.8) * ch as f64,
                rng.gen_range(0.3..0.7) * cw as f64,
                rng.gen_range(-350.0..350.0),
                rng.gen_range(2.0..6.0),
            )
        })
        .collect();
    let mut elev = vec![0.0f32; ch * cw];
    for i in 0..ch {
        let ridge_j = cw as f64 * (0.5 + 0.12 * (std::f64::consts::TAU * i as f64 / ch as f64 + phase).sin());
        for j in 0..cw {
            let d = (j as f64 - ridge_j) / ridge_width;
            // taper toward the north/south ends so the island has coasts
            let ti = (i as f64 + 0.5) / ch as f64;
            let taper = (std::f64::consts::PI * ti).sin().max(0.0);
            let mut e = amp * taper * (-0.5 * d * d).exp() - sea;
            for &(bi, bj, ba, bs) in &bumps {
                let dd = ((i as f64 - bi).powi(2) + (j as f64 - bj).powi(2)) / (2.0 * bs * bs);
                e += ba * (-dd).exp();
            }
            elev[i * cw + j] = e as f32;
        }
    }
    elev
}

fn gaussian_smooth(values: &[f32], h: usize, w: usize, sigma: f64) -> Vec<f32> {
    if sigma <= 0.0 {
        return values.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp())
        .collect();
    let pass = |src: &[f32], len: usize, stride: usize, count: usize| -> Vec<f32> {
        // smooth along one axis; lines are `count` runs of `len` elements
        let mut dst = vec![0.0f32; src.len()];
        for line in 0..count {
            for i in 0..len {
                let mut acc = 0.0f64;
                let mut norm = 0.0f64;
                for (ki, &kv) in kernel.iter().enumerate() {
                    let s = i as isize + ki as isize - radius;
                    if s < 0 || s >= len as isize {
                        continue;
                    }
                    acc += kv * f64::from(src[line_base(line, len, stride, count) + s as usize * stride]);
                    norm += kv;
                }
                dst[line_base(line, len, stride, count) + i * stride] = (acc / norm) as f32;
            }
        }
        dst
    };
    // rows: lines are h runs over w contiguous elements
    let tmp = pass(values, w, 1, h);
    // columns: lines are w runs strided by w
    pass(&tmp, h, w, w)
}

fn line_base(line: usize, len: usize, stride: usize, _count: usize) -> usize {
    if stride == 1 {
        line * len
    } else {
        line
    }
}

fn displace(values: &[f32], h: usize, w: usize, d: (isize, isize)) -> Vec<f32> {
    let (di, dj) = d;
    let mut out = vec![0.0f32; h * w];
    for i in 0..h {
        let si = (i as isize - di).clamp(0, h as isize - 1) as usize;
        for j in 0..w {
            let sj = (j as isize - dj).clamp(0, w as isize - 1) as usize;
            out[i * w + j] = values[si * w + sj];
        }
    }
    out
}

fn block_mean(values: &[f32], h: usize, w: usize, f: usize) -> Vec<f32> {
    let (lh, lw) = (h / f, w / f);
    let mut out = vec![0.0f32; lh * lw];
    for bi in 0..lh {
        for bj in 0..lw {
            let mut acc = 0.0f64;
            for i in 0..f {
                for j in 0..f {
                    acc += f64::from(values[(bi * f + i) * w + bj * f + j]);
                }
            }
            out[bi * lw + bj] = (acc / (f * f) as f64) as f32;
        }
    }
    out
}

fn center_crop(values: &[f32], h: usize, w: usize, th: usize, tw: usize) -> Vec<f32> {
    let oi = (h - th) / 2;
    let oj = (w - tw) / 2;
    let mut out = Vec::with_capacity(th * tw);
    for i in 0..th {
        for j in 0..tw {
            out.push(values[(i + oi) * w + j + oj]);
        }
    }
    out
}

/// Standard normal via Box-Muller from two uniforms.
fn randn(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generate the full dataset: high-res truth from Gaussian rain cells
/// modulated by terrain, low-res input as a block-mean of a displaced,
/// wet-biased, smoothed copy. Deterministic under the seed.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let (ch, cw) = cfg.canvas_shape();
    let (hh, hw) = cfg.hr_shape;
    let (lh, lw) = cfg.lr_shape;
    let f = cfg.factor();

    let elev = synth_elevation(cfg);
    let land: Vec<bool> = elev.iter().map(|&e| e >= 0.0).collect();
    let elev_max = elev.iter().cloned().fold(1.0f32, f32::max);

    // Taiwan-like georeference for the high-res grid
    let hr_georef = (22.0, 120.0, 0.05, 0.05);
    let lr_georef = (
        22.0 - 0.05 * ((ch - hh) / 2) as f64,
        120.0 - 0.05 * ((cw - hw) / 2) as f64,
        0.05 * f as f64,
        0.05 * f as f64,
    );

    let hr_elev = center_crop(&elev, ch, cw, hh, hw);
    let hr_land: Vec<bool> = hr_elev.iter().map(|&e| e >= 0.0).collect();
    let elevation = GridField::new(
        hh,
        hw,
        hr_georef,
        hr_elev,
        hr_land.clone(),
        Units::Meters,
    )?;

    let mut samples = Vec::with_capacity(cfg.n_days);
    for day in 0..cfg.n_days {
        let mut rng = ChaCha8Rng::seed_from_u64(
            cfg.seed ^ (day as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x51_7CC1),
        );
        let date = cfg.start_date + chrono::Days::new(day as u64);
        let mut truth = vec![0.0f32; ch * cw];
        if !rng.gen_bool(cfg.dry_day_prob) {
            let n_cells = rng.gen_range(cfg.cells_min..=cfg.cells_max);
            let cells: Vec<(f64, f64, f64, f64)> = (0..n_cells)
                .map(|_| {
                    (
                        rng.gen_range(0.0..ch as f64),
                        rng.gen_range(0.0..cw as f64),
                        (2.3 + 0.8 * randn(&mut rng)).exp(),
                        rng.gen_range(2.5..9.0),
                    )
                })
                .collect();
            for i in 0..ch {
                for j in 0..cw {
                    let mut v = 0.0f64;
                    for &(ci, cj, amp, sigma) in &cells {
                        let dd = ((i as f64 - ci).powi(2) + (j as f64 - cj).powi(2))
                            / (2.0 * sigma * sigma);
                        if dd < 40.0 {
                            v += amp * (-dd).exp();
                        }
                    }
                    let oro = 1.0
                        + cfg.orographic_gain * f64::from(elev[i * cw + j].max(0.0) / elev_max);
                    truth[i * cw + j] = (v * oro) as f32;
                }
            }
            // observations exist over land only
            for (v, &m) in truth.iter_mut().zip(&land) {
                if !m {
                    *v = 0.0;
                }
            }
        }

        let hr_values = center_crop(&truth, ch, cw, hh, hw);
        let y_hr = GridField::new(hh, hw, hr_georef, hr_values, hr_land.clone(), Units::MmPerDay)?;

        let biased = displace(&truth, ch, cw, cfg.displacement);
        let mut biased: Vec<f32> = biased.iter().map(|&v| (f64::from(v) * cfg.wet_bias) as f32).collect();
        biased = gaussian_smooth(&biased, ch, cw, cfg.smoothing_radius);
        let lr_values = block_mean(&biased, ch, cw, f);
        let x_lr = GridField::new(
            lh,
            lw,
            lr_georef,
            lr_values,
            vec![true; lh * lw],
            Units::MmPerDay,
        )?;

        samples.push(PairedSample { x_lr, y_hr, date });
    }
    Ok(SyntheticDataset {
        samples,
        elevation,
    })
}

/// Sequential day-of-year (1..=365) with leap day 366 folded into 365.
pub fn folded_day_of_year(date: NaiveDate) -> u32 {
    date.ordinal().min(365)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    fn small_field() -> GridField {
        GridField::new(
            2,
            3,
            (21.5, 120.25, 0.25, 0.25),
            vec![0.0, 1.5, 2.25, 3.0, 4.5, 5.125],
            vec![true, false, true, true, true, false],
            Units::MmPerDay,
        )
        .unwrap()
    }

    #[test]
    fn grd1_round_trip_bitwise() {
        let dir = tmp();
        let path = dir.path().join("f.grd");
        let field = small_field();
        save_grid(&field, &path).unwrap();
        let loaded = load_grid(&path).unwrap();
        assert_eq!(loaded, field);
        // saving the loaded field reproduces the bytes exactly
        let path2 = dir.path().join("g.grd");
        save_grid(&loaded, &path2).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn grd1_truncated_names_offset() {
        let dir = tmp();
        let path = dir.path().join("f.grd");
        save_grid(&small_field(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 5);
        let cut = dir.path().join("cut.grd");
        fs::write(&cut, &bytes).unwrap();
        match load_grid(&cut) {
            Err(Error::Parse { offset, detail }) => {
                assert_eq!(offset, bytes.len());
                assert!(detail.contains("truncated"), "{detail}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn grd1_bad_magic() {
        let dir = tmp();
        let path = dir.path().join("bad.grd");
        fs::write(&path, b"GRDX 1 1 0 0 1 1 mm_day\n\x00\x00\x00\x00\x01").unwrap();
        assert!(matches!(load_grid(&path), Err(Error::Parse { offset: 0, .. })));
    }

    #[test]
    fn grd1_non_finite_payload() {
        let dir = tmp();
        let path = dir.path().join("nan.grd");
        let mut bytes = b"GRD1 1 1 0 0 1 1 mm_day\n".to_vec();
        let header_len = bytes.len();
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        bytes.push(1);
        fs::write(&path, &bytes).unwrap();
        match load_grid(&path) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, header_len),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn preprocess_lr_unit_conversion_and_crop() {
        // 20x20 raster at 0.25 degrees; the Taiwan-like box keeps 14x9
        let raw = GridField::new(
            20,
            20,
            (22.0, 120.0, 0.25, 0.25),
            vec![0.001; 400],
            vec![true; 400],
            Units::Meters,
        )
        .unwrap();
        let bbox = CropBox {
            lat_min: 22.0,
            lat_max: 25.25,
            lon_min: 120.0,
            lon_max: 122.0,
        };
        let out = preprocess_lr(&raw, &bbox).unwrap();
        assert_eq!((out.height, out.width), (14, 9));
        assert_eq!(out.units, Units::MmPerDay);
        assert!(out.values.iter().all(|&v| (v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn crop_indices_match_georeference_arithmetic() {
        // oracle: index i is kept iff lo <= c0 + i*dc <= hi
        let (a, b) = crop_range(20, 21.0, 0.25, 21.9, 25.2).unwrap();
        let lo = (0..20)
            .find(|&i| 21.0 + i as f64 * 0.25 >= 21.9)
            .unwrap();
        let hi = (0..20)
            .rev()
            .find(|&i| 21.0 + i as f64 * 0.25 <= 25.2)
            .unwrap();
        assert_eq!((a, b), (lo, hi));
        assert!(crop_range(5, 0.0, 1.0, 10.0, 11.0).is_err());
    }

    #[test]
    fn preprocess_hr_masks_sea_keeps_land() {
        let raw = GridField::new(
            2,
            2,
            (22.0, 120.0, 0.05, 0.05),
            vec![1.0, 2.0, 3.0, 4.0],
            vec![true, false, false, true],
            Units::MmPerDay,
        )
        .unwrap();
        let bbox = CropBox {
            lat_min: 21.9,
            lat_max: 22.2,
            lon_min: 119.9,
            lon_max: 120.2,
        };
        let out = preprocess_hr(&raw, &bbox).unwrap();
        assert_eq!(out.values, vec![1.0, 0.0, 0.0, 4.0]);
        // all-sea raster zeroes everything
        let sea = GridField::new(
            2,
            2,
            (22.0, 120.0, 0.05, 0.05),
            vec![1.0, 2.0, 3.0, 4.0],
            vec![false; 4],
            Units::MmPerDay,
        )
        .unwrap();
        let z = preprocess_hr(&sea, &bbox).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn preprocess_hr_idempotent() {
        let raw = GridField::new(
            3,
            3,
            (22.0, 120.0, 0.05, 0.05),
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
            vec![true, false, true, true, true, false, true, true, true],
            Units::MmPerDay,
        )
        .unwrap();
        let bbox = CropBox {
            lat_min: 21.9,
            lat_max: 22.3,
            lon_min: 119.9,
            lon_max: 120.3,
        };
        let once = preprocess_hr(&raw, &bbox).unwrap();
        let twice = preprocess_hr(&once, &bbox).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn normalize_known_points() {
        let f = GridField::from_values(
            1,
            2,
            vec![0.0, std::f32::consts::E - 1.0],
            Units::MmPerDay,
        )
        .unwrap();
        let n = normalize(&f).unwrap();
        assert!((n.values[0] - 0.0).abs() < 1e-7);
        assert!((n.values[1] - 1.0).abs() < 1e-6);
        let neg = GridField::from_values(1, 1, vec![-0.5], Units::MmPerDay).unwrap();
        assert!(normalize(&neg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn normalize_denormalize_round_trip(vals in proptest::collection::vec(0.0f32..1e4, 6)) {
            let f = GridField::from_values(2, 3, vals.clone(), Units::MmPerDay).unwrap();
            let back = denormalize(&normalize(&f).unwrap());
            for (a, b) in back.values.iter().zip(&vals) {
                let rel = (a - b).abs() / b.abs().max(1.0);
                prop_assert!(rel < 1e-5, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn mask_elevation_boundary_values() {
        let f = GridField::from_values(
            1,
            3,
            vec![-36.93, 3706.753, 0.0],
            Units::Meters,
        )
        .unwrap();
        let m = mask_elevation(&f);
        assert!(!m.mask[0]);
        assert_eq!(m.values[0], 0.0);
        assert!(m.mask[1]);
        assert_eq!(m.values[1], 3706.753);
        assert!(m.mask[2]);
        // all-nonnegative terrain unchanged
        let pos = GridField::from_values(1, 2, vec![5.0, 10.0], Units::Meters).unwrap();
        assert_eq!(mask_elevation(&pos), pos);
    }

    #[test]
    fn divergence_flat_and_ramp() {
        let flat = GridField::from_values(3, 4, vec![7.0; 12], Units::Meters).unwrap();
        let d = terrain_divergence(&flat, 1000.0, 1000.0).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));

        // ramp 3 m per cell along x, 1 km spacing
        let mut vals = vec![0.0f32; 12];
        for i in 0..3 {
            for j in 0..4 {
                vals[i * 4 + j] = 3.0 * j as f32;
            }
        }
        let ramp = GridField::from_values(3, 4, vals, Units::Meters).unwrap();
        let d = terrain_divergence(&ramp, 1000.0, 1000.0).unwrap();
        for &v in &d.values {
            assert!((v - 0.003).abs() < 1e-9, "{v}");
        }
        let degenerate = GridField::from_values(1, 4, vec![0.0; 4], Units::Meters).unwrap();
        assert!(terrain_divergence(&degenerate, 1.0, 1.0).is_err());
    }

    #[test]
    fn divergence_matches_central_difference_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (h, w) = (5, 6);
        let vals: Vec<f32> = (0..h * w).map(|_| rng.gen_range(-100.0..2000.0)).collect();
        let t = GridField::from_values(h, w, vals.clone(), Units::Meters).unwrap();
        let (dy, dx) = (500.0f64, 700.0f64);
        let d = terrain_divergence(&t, dy, dx).unwrap();
        let v = |i: usize, j: usize| f64::from(vals[i * w + j]);
        for i in 1..h - 1 {
            for j in 1..w - 1 {
                let sy = (v(i + 1, j) - v(i - 1, j)) / (2.0 * dy);
                let sx = (v(i, j + 1) - v(i, j - 1)) / (2.0 * dx);
                let want = (sy * sy + sx * sx).sqrt() as f32;
                assert_eq!(d.get(i, j), want);
            }
        }
    }

    #[test]
    fn split_counts_disjoint_exhaustive_deterministic() {
        let (tr, va, te) = split_indices(100, 7).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (80, 10, 10));
        let mut all: Vec<usize> = tr.iter().chain(&va).chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        let again = split_indices(100, 7).unwrap();
        assert_eq!((tr, va, te), again);
        let different = split_indices(100, 8).unwrap();
        assert_ne!(different.0, again.0);
        assert!(split_indices(9, 0).is_err());
    }

    fn quick_cfg() -> SynthConfig {
        SynthConfig {
            seed: 11,
            n_days: 20,
            lr_shape: (7, 5),
            hr_shape: (30, 22),
            ..SynthConfig::default()
        }
    }

    #[test]
    fn generator_deterministic_and_nonnegative() {
        let a = generate_synthetic(&quick_cfg()).unwrap();
        let b = generate_synthetic(&quick_cfg()).unwrap();
        assert_eq!(a.samples.len(), 20);
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            assert_eq!(sa.x_lr, sb.x_lr);
            assert_eq!(sa.y_hr, sb.y_hr);
            assert_eq!(sa.date, sb.date);
            assert!(sa.y_hr.values.iter().all(|&v| v >= 0.0));
            // land mask constant across days
            assert_eq!(sa.y_hr.mask, a.elevation.mask);
        }
        assert_eq!(a.elevation, b.elevation);
        assert!(a.elevation.values.iter().any(|&v| v < 0.0), "some sea");
        assert!(a.elevation.values.iter().any(|&v| v > 500.0), "some mountains");
    }

    #[test]
    fn generator_homogeneous_limit() {
        // no orography, no bias, no displacement, no smoothing, truth on the
        // full canvas: the input is exactly the block-mean of the truth
        let cfg = SynthConfig {
            seed: 3,
            n_days: 6,
            lr_shape: (7, 5),
            hr_shape: (28, 20),
            orographic_gain: 0.0,
            wet_bias: 1.0,
            displacement: (0, 0),
            smoothing_radius: 0.0,
            dry_day_prob: 0.0,
            ..SynthConfig::default()
        };
        assert_eq!(cfg.factor(), 4);
        let ds = generate_synthetic(&cfg).unwrap();
        for s in &ds.samples {
            let want = block_mean(&s.y_hr.values, 28, 20, 4);
            for (a, b) in s.x_lr.values.iter().zip(&want) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn generator_all_dry() {
        let cfg = SynthConfig {
            dry_day_prob: 1.0,
            n_days: 5,
            ..quick_cfg()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        for s in &ds.samples {
            assert!(s.y_hr.values.iter().all(|&v| v == 0.0));
            assert!(s.x_lr.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn generator_wet_bias_mean_ratio() {
        // Monte-Carlo: with a 2x wet bias the input mean tracks twice the
        // coarsened-truth mean within 5% over many days
        let cfg = SynthConfig {
            seed: 9,
            n_days: 1000,
            lr_shape: (14, 9),
            hr_shape: (70, 45),
            wet_bias: 2.0,
            ..SynthConfig::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        let mut lr_sum = 0.0f64;
        let mut hr_sum = 0.0f64;
        for s in &ds.samples {
            lr_sum += s.x_lr.values.iter().map(|&v| f64::from(v)).sum::<f64>()
                / s.x_lr.values.len() as f64;
            hr_sum += s.y_hr.values.iter().map(|&v| f64::from(v)).sum::<f64>()
                / s.y_hr.values.len() as f64;
        }
        let ratio = lr_sum / hr_sum;
        assert!(
            (ratio - 2.0).abs() / 2.0 < 0.05,
            "mean ratio {ratio} not within 5% of the wet bias"
        );
    }

    #[test]
    fn generator_rejects_mismatched_aspect() {
        let cfg = SynthConfig {
            lr_shape: (9, 14),
            hr_shape: (66, 41),
            ..SynthConfig::default()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn resize_bilinear_matches_factor_convention() {
        let src = vec![0.0f32, 1.0];
        let out = resize_bilinear(&src, (1, 2), (1, 4));
        let want = [0.0, 0.25, 0.75, 1.0];
        for (a, b) in out.iter().zip(&want) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn degrade_handles_ragged_blocks() {
        // 5 rows into 2 blocks: [0,1) and [1,2) of sizes 2 and 3
        let vals: Vec<f32> = (0..5).map(|i| i as f32).collect();
        let out = degrade_to(&vals, (5, 1), (2, 1)).unwrap();
        assert_eq!(out, vec![0.5, 3.0]);
        assert!(degrade_to(&vals, (5, 1), (6, 1)).is_err());
    }

    #[test]
    fn folded_doy_handles_leap_days() {
        let dec31_leap = NaiveDate::from_ymd_opt(2000, 12, 31).unwrap();
        assert_eq!(dec31_leap.ordinal(), 366);
        assert_eq!(folded_day_of_year(dec31_leap), 365);
        let dec31 = NaiveDate::from_ymd_opt(2001, 12, 31).unwrap();
        assert_eq!(folded_day_of_year(dec31), 365);
    }
}
