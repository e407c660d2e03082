//! Statistical downscaling baselines: windowed empirical CDFs, quantile
//! mapping, and spatial disaggregation.
//!
//! CDFs use Weibull plotting positions i/(n+1) with tie-averaged ranks and
//! linear interpolation between distinct sample values; out-of-range
//! evaluations clamp to [1/(n+1), n/(n+1)] so record-breaking inputs cannot
//! invert to unbounded quantiles.

use crate::data::{folded_day_of_year, resize_bilinear, GridField, Units};
use crate::error::{Error, Result};
use crate::layers::{ResampleMethod, ResampleSpec};
use chrono::NaiveDate;

/// Sorted per-grid-point sample set with precomputed plotting positions.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    samples: Vec<f32>,
    /// (value, position) knots, one per distinct sample value.
    knots: Vec<(f64, f64)>,
}

impl EmpiricalCdf {
    pub fn from_samples(mut samples: Vec<f32>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Config(format!(
                "empirical CDF needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if !samples.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { op: "ecdf" });
        }
        samples.sort_by(f32::total_cmp);
        let n = samples.len() as f64;
        let mut knots = Vec::new();
        let mut i = 0;
        while i < samples.len() {
            let mut j = i;
            while j + 1 < samples.len() && samples[j + 1] == samples[i] {
                j += 1;
            }
            // ranks i+1..=j+1 averaged over the tied block
            let mean_rank = (i + j) as f64 / 2.0 + 1.0;
            knots.push((f64::from(samples[i]), mean_rank / (n + 1.0)));
            i = j + 1;
        }
        Ok(EmpiricalCdf { samples, knots })
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn min(&self) -> f32 {
        self.samples[0]
    }

    pub fn max(&self) -> f32 {
        *self.samples.last().unwrap()
    }

    /// Cumulative probability of `x`, clamped to the plotting-position range.
    pub fn eval(&self, x: f64) -> f64 {
        let first = self.knots[0];
        let last = *self.knots.last().unwrap();
        if x <= first.0 {
            return first.1;
        }
        if x >= last.0 {
            return last.1;
        }
        // bracketing knots by value
        let mut lo = 0;
        let mut hi = self.knots.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.knots[mid].0 <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (v0, p0) = self.knots[lo];
        let (v1, p1) = self.knots[hi];
        if v1 == v0 {
            return p0;
        }
        p0 + (x - v0) / (v1 - v0) * (p1 - p0)
    }

    /// Linear-interpolated quantile; inverse of [`EmpiricalCdf::eval`] on
    /// the sample range (up to ties).
    pub fn invert(&self, p: f64) -> f64 {
        let first = self.knots[0];
        let last = *self.knots.last().unwrap();
        if p <= first.1 {
            return first.0;
        }
        if p >= last.1 {
            return last.0;
        }
        let mut lo = 0;
        let mut hi = self.knots.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.knots[mid].1 <= p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (v0, p0) = self.knots[lo];
        let (v1, p1) = self.knots[hi];
        if p1 == p0 {
            return v0;
        }
        v0 + (p - p0) / (p1 - p0) * (v1 - v0)
    }
}

/// Day-of-year window, `day +- half_width` with Dec/Jan wrap-around on a
/// 365-day calendar (day 366 folds into 365).
#[derive(Debug, Clone)]
pub struct WindowIndex {
    pub day_of_year: u32,
    pub half_width: u32,
    pub years: Vec<i32>,
}

impl WindowIndex {
    pub fn new(day_of_year: u32, half_width: u32) -> Result<Self> {
        if day_of_year == 0 || day_of_year > 366 {
            return Err(Error::Config(format!("day of year {day_of_year} out of 1..=366")));
        }
        Ok(WindowIndex {
            day_of_year: day_of_year.min(365),
            half_width,
            years: Vec::new(),
        })
    }

    pub fn for_date(date: NaiveDate, half_width: u32) -> Self {
        WindowIndex {
            day_of_year: folded_day_of_year(date),
            half_width,
            years: Vec::new(),
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        let doy = folded_day_of_year(date) as i32;
        let k = self.day_of_year as i32;
        let d = (doy - k).abs();
        d.min(365 - d) <= self.half_width as i32
    }
}

/// Collect all values whose date falls in the window across every year and
/// build the CDF. Records the years that contributed.
pub fn build_ecdf(dates: &[NaiveDate], values: &[f32], w: &WindowIndex) -> Result<EmpiricalCdf> {
    if dates.len() != values.len() {
        return Err(Error::GridMismatch(format!(
            "{} dates vs {} values",
            dates.len(),
            values.len()
        )));
    }
    let picked: Vec<f32> = dates
        .iter()
        .zip(values)
        .filter(|(d, _)| w.contains(**d))
        .map(|(_, &v)| v)
        .collect();
    if picked.len() < 2 {
        return Err(Error::Config(format!(
            "window around day {} matched {} samples; need >= 2",
            w.day_of_year,
            picked.len()
        )));
    }
    EmpiricalCdf::from_samples(picked)
}

/// Window metadata with contributing years filled in.
pub fn window_for(dates: &[NaiveDate], date: NaiveDate, half_width: u32) -> WindowIndex {
    let mut w = WindowIndex::for_date(date, half_width);
    let mut years: Vec<i32> = dates
        .iter()
        .filter(|d| w.contains(**d))
        .map(|d| chrono::Datelike::year(d))
        .collect();
    years.sort_unstable();
    years.dedup();
    w.years = years;
    w
}

/// Quantile mapping: per grid point, push the biased value through its own
/// CDF and invert through the reference CDF.
pub fn qm_correct(
    x_bias: &GridField,
    f_bias: &[EmpiricalCdf],
    f_ref: &[EmpiricalCdf],
) -> Result<GridField> {
    let n = x_bias.height * x_bias.width;
    if f_bias.len() != n || f_ref.len() != n {
        return Err(Error::GridMismatch(format!(
            "{n} grid points vs {} biased / {} reference CDFs",
            f_bias.len(),
            f_ref.len()
        )));
    }
    let mut out = x_bias.clone();
    for (i, v) in out.values.iter_mut().enumerate() {
        let p = f_bias[i].eval(f64::from(*v));
        *v = f_ref[i].invert(p).max(0.0) as f32;
    }
    Ok(out)
}

/// Spatial disaggregation after quantile mapping:
/// `Z = Y_h + Intp(x_cor - Y_l) * Y_h / (Intp(Y_l) + 1)`, clamped at zero.
pub fn bcsd(
    x_cor_lr: &GridField,
    y_l: &GridField,
    y_h: &GridField,
    interp: &ResampleSpec,
) -> Result<GridField> {
    if !x_cor_lr.same_grid(y_l) {
        return Err(Error::GridMismatch(format!(
            "corrected field {}x{} vs low-res climatology {}x{}",
            x_cor_lr.height, x_cor_lr.width, y_l.height, y_l.width
        )));
    }
    if interp.method != ResampleMethod::Bilinear {
        return Err(Error::Config(format!(
            "spatial disaggregation interpolates bilinearly, got {}",
            interp.method.name()
        )));
    }
    let from = (x_cor_lr.height, x_cor_lr.width);
    let to = (y_h.height, y_h.width);
    let anomaly: Vec<f32> = x_cor_lr
        .values
        .iter()
        .zip(&y_l.values)
        .map(|(&x, &m)| x - m)
        .collect();
    let anomaly_hr = resize_bilinear(&anomaly, from, to);
    let yl_hr = resize_bilinear(&y_l.values, from, to);
    let mut values = Vec::with_capacity(y_h.values.len());
    for i in 0..y_h.values.len() {
        let base = f64::from(y_h.values[i]);
        let z = base + f64::from(anomaly_hr[i]) * base / (f64::from(yl_hr[i]) + 1.0);
        values.push(z.max(0.0) as f32);
    }
    GridField::new(
        y_h.height,
        y_h.width,
        (y_h.lat0, y_h.lon0, y_h.dlat, y_h.dlon),
        values,
        y_h.mask.clone(),
        Units::MmPerDay,
    )
}
