//! Verification metrics over masked grids: MAE, RMSE, Pearson correlation,
//! SSIM with an 11x11 Gaussian window, and the POD/FAR/TS forecast
//! indicators at a wet/dry threshold of 0.1 mm.
//!
//! All metrics operate in physical units (mm/day); fields coming out of the
//! model are expm1-denormalized first. Undefined values (zero variance, zero
//! indicator denominators) are reported as absent and excluded from
//! aggregates rather than silently coerced.

use crate::data::GridField;
use crate::error::{Error, Result};
use chrono::NaiveDate;

pub const WET_THRESHOLD_MM: f64 = 0.1;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

fn check_pair(pred: &GridField, obs: &GridField, mask: &[bool]) -> Result<usize> {
    if !pred.same_grid(obs) {
        return Err(Error::GridMismatch(format!(
            "{}x{} vs {}x{}",
            pred.height, pred.width, obs.height, obs.width
        )));
    }
    if mask.len() != pred.values.len() {
        return Err(Error::GridMismatch(format!(
            "mask length {} vs {} grid points",
            mask.len(),
            pred.values.len()
        )));
    }
    let n = mask.iter().filter(|&&m| m).count();
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(n)
}

/// Mean absolute error over masked-in points.
pub fn mae(pred: &GridField, obs: &GridField, mask: &[bool]) -> Result<f64> {
    let n = check_pair(pred, obs, mask)?;
    let mut acc = 0.0f64;
    for i in 0..mask.len() {
        if mask[i] {
            acc += (f64::from(pred.values[i]) - f64::from(obs.values[i])).abs();
        }
    }
    Ok(acc / n as f64)
}

/// Root mean square error over masked-in points.
pub fn rmse(pred: &GridField, obs: &GridField, mask: &[bool]) -> Result<f64> {
    let n = check_pair(pred, obs, mask)?;
    let mut acc = 0.0f64;
    for i in 0..mask.len() {
        if mask[i] {
            let d = f64::from(pred.values[i]) - f64::from(obs.values[i]);
            acc += d * d;
        }
    }
    Ok((acc / n as f64).sqrt())
}

/// Sample Pearson correlation over masked-in points; `None` when either
/// field has zero variance there.
pub fn pearson(pred: &GridField, obs: &GridField, mask: &[bool]) -> Result<Option<f64>> {
    let n = check_pair(pred, obs, mask)?;
    if n < 2 {
        return Ok(None);
    }
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    for i in 0..mask.len() {
        if mask[i] {
            sx += f64::from(pred.values[i]);
            sy += f64::from(obs.values[i]);
        }
    }
    let (mx, my) = (sx / n as f64, sy / n as f64);
    let (mut vxx, mut vyy, mut vxy) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..mask.len() {
        if mask[i] {
            let dx = f64::from(pred.values[i]) - mx;
            let dy = f64::from(obs.values[i]) - my;
            vxx += dx * dx;
            vyy += dy * dy;
            vxy += dx * dy;
        }
    }
    if vxx == 0.0 || vyy == 0.0 {
        return Ok(None);
    }
    Ok(Some(vxy / (vxx.sqrt() * vyy.sqrt())))
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as isize;
    let mut w = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    for i in -half..=half {
        for j in -half..=half {
            let d2 = (i * i + j * j) as f64;
            w.push((-0.5 * d2 / (SSIM_SIGMA * SSIM_SIGMA)).exp());
        }
    }
    w
}

/// Mean local SSIM over masked-in centers with an explicit dynamic range.
/// Window weights are renormalized over in-bounds, masked-in pixels.
pub fn ssim_with_dynamic_range(
    pred: &GridField,
    obs: &GridField,
    mask: &[bool],
    l: f64,
) -> Result<f64> {
    check_pair(pred, obs, mask)?;
    let c1 = (0.01 * l).powi(2);
    let c2 = (0.03 * l).powi(2);
    let (h, w) = (pred.height, pred.width);
    let win = gaussian_window();
    let half = (SSIM_WINDOW / 2) as isize;
    let mut total = 0.0f64;
    let mut count = 0usize;
    for ci in 0..h {
        for cj in 0..w {
            if !mask[ci * w + cj] {
                continue;
            }
            let (mut norm, mut m1, mut m2) = (0.0f64, 0.0f64, 0.0f64);
            let (mut q11, mut q22, mut q12) = (0.0f64, 0.0f64, 0.0f64);
            for wi in -half..=half {
                let i = ci as isize + wi;
                if i < 0 || i >= h as isize {
                    continue;
                }
                for wj in -half..=half {
                    let j = cj as isize + wj;
                    if j < 0 || j >= w as isize {
                        continue;
                    }
                    let at = i as usize * w + j as usize;
                    if !mask[at] {
                        continue;
                    }
                    let wt = win[((wi + half) * SSIM_WINDOW as isize + wj + half) as usize];
                    let a = f64::from(pred.values[at]);
                    let b = f64::from(obs.values[at]);
                    norm += wt;
                    m1 += wt * a;
                    m2 += wt * b;
                    q11 += wt * a * a;
                    q22 += wt * b * b;
                    q12 += wt * a * b;
                }
            }
            let (m1, m2) = (m1 / norm, m2 / norm);
            let v1 = q11 / norm - m1 * m1;
            let v2 = q22 / norm - m2 * m2;
            let cov = q12 / norm - m1 * m2;
            let s = ((2.0 * m1 * m2 + c1) * (2.0 * cov + c2))
                / ((m1 * m1 + m2 * m2 + c1) * (v1 + v2 + c2));
            total += s;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// SSIM with the dynamic range taken per sample as
/// `max(max(pred), max(obs), 1 mm)` over masked-in points.
pub fn ssim(pred: &GridField, obs: &GridField, mask: &[bool]) -> Result<f64> {
    check_pair(pred, obs, mask)?;
    let mut l = 1.0f64;
    for i in 0..mask.len() {
        if mask[i] {
            l = l.max(f64::from(pred.values[i])).max(f64::from(obs.values[i]));
        }
    }
    ssim_with_dynamic_range(pred, obs, mask, l)
}

/// 2x2 contingency table at a wet/dry threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Contingency {
    pub hits: usize,
    pub misses: usize,
    pub false_alarms: usize,
    pub correct_negatives: usize,
}

impl Contingency {
    pub fn from_fields(
        pred: &GridField,
        obs: &GridField,
        mask: &[bool],
        threshold: f64,
    ) -> Result<Self> {
        check_pair(pred, obs, mask)?;
        let mut c = Contingency {
            hits: 0,
            misses: 0,
            false_alarms: 0,
            correct_negatives: 0,
        };
        for i in 0..mask.len() {
            if !mask[i] {
                continue;
            }
            let p = f64::from(pred.values[i]) >= threshold;
            let o = f64::from(obs.values[i]) >= threshold;
            match (p, o) {
                (true, true) => c.hits += 1,
                (false, true) => c.misses += 1,
                (true, false) => c.false_alarms += 1,
                (false, false) => c.correct_negatives += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.hits + self.misses + self.false_alarms + self.correct_negatives
    }

    /// Probability of detection H/(H+M); `None` when nothing was observed.
    pub fn pod(&self) -> Option<f64> {
        ratio(self.hits, self.hits + self.misses)
    }

    /// False alarm ratio F/(H+F); `None` when nothing was predicted.
    pub fn far(&self) -> Option<f64> {
        ratio(self.false_alarms, self.hits + self.false_alarms)
    }

    /// Threat score H/(H+M+F).
    pub fn ts(&self) -> Option<f64> {
        ratio(self.hits, self.hits + self.misses + self.false_alarms)
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// POD, FAR, TS at the given threshold.
pub fn forecast_indicators(
    pred: &GridField,
    obs: &GridField,
    mask: &[bool],
    threshold: f64,
) -> Result<(Option<f64>, Option<f64>, Option<f64>)> {
    let c = Contingency::from_fields(pred, obs, mask, threshold)?;
    Ok((c.pod(), c.far(), c.ts()))
}

// ---- per-day reports ---------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct DayMetrics {
    pub date: NaiveDate,
    pub mae: f64,
    pub rmse: f64,
    pub pearson: Option<f64>,
    pub ssim: f64,
    pub pod: Option<f64>,
    pub far: Option<f64>,
    pub ts: Option<f64>,
}

/// Evaluate one day's prediction against the truth.
pub fn evaluate_day(
    date: NaiveDate,
    pred: &GridField,
    obs: &GridField,
    mask: &[bool],
) -> Result<DayMetrics> {
    let (pod, far, ts) = forecast_indicators(pred, obs, mask, WET_THRESHOLD_MM)?;
    Ok(DayMetrics {
        date,
        mae: mae(pred, obs, mask)?,
        rmse: rmse(pred, obs, mask)?,
        pearson: pearson(pred, obs, mask)?,
        ssim: ssim(pred, obs, mask)?,
        pod,
        far,
        ts,
    })
}

/// Mean and median of each column over days where it is defined.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AggregateRow {
    pub mae: f64,
    pub rmse: f64,
    pub pearson: Option<f64>,
    pub ssim: f64,
    pub pod: Option<f64>,
    pub far: Option<f64>,
    pub ts: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub days: Vec<DayMetrics>,
}

impl MetricsReport {
    pub fn new(days: Vec<DayMetrics>) -> Self {
        MetricsReport { days }
    }

    pub fn mean(&self) -> AggregateRow {
        AggregateRow {
            mae: mean(self.days.iter().map(|d| d.mae)).unwrap_or(f64::NAN),
            rmse: mean(self.days.iter().map(|d| d.rmse)).unwrap_or(f64::NAN),
            pearson: mean(self.days.iter().filter_map(|d| d.pearson)),
            ssim: mean(self.days.iter().map(|d| d.ssim)).unwrap_or(f64::NAN),
            pod: mean(self.days.iter().filter_map(|d| d.pod)),
            far: mean(self.days.iter().filter_map(|d| d.far)),
            ts: mean(self.days.iter().filter_map(|d| d.ts)),
        }
    }

    pub fn median(&self) -> AggregateRow {
        AggregateRow {
            mae: median(self.days.iter().map(|d| d.mae)).unwrap_or(f64::NAN),
            rmse: median(self.days.iter().map(|d| d.rmse)).unwrap_or(f64::NAN),
            pearson: median(self.days.iter().filter_map(|d| d.pearson)),
            ssim: median(self.days.iter().map(|d| d.ssim)).unwrap_or(f64::NAN),
            pod: median(self.days.iter().filter_map(|d| d.pod)),
            far: median(self.days.iter().filter_map(|d| d.far)),
            ts: median(self.days.iter().filter_map(|d| d.ts)),
        }
    }

    /// One row per day plus mean and median footer rows; undefined cells
    /// are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,mae,rmse,pearson,ssim,pod,far,ts\n");
        for d in &self.days {
            out.push_str(&format!(
                "{},{:.6},{:.6},{},{:.6},{},{},{}\n",
                d.date,
                d.mae,
                d.rmse,
                opt(d.pearson),
                d.ssim,
                opt(d.pod),
                opt(d.far),
                opt(d.ts)
            ));
        }
        for (label, row) in [("mean", self.mean()), ("median", self.median())] {
            out.push_str(&format!(
                "{label},{:.6},{:.6},{},{:.6},{},{},{}\n",
                row.mae,
                row.rmse,
                opt(row.pearson),
                row.ssim,
                opt(row.pod),
                opt(row.far),
                opt(row.ts)
            ));
        }
        out
    }

    /// Parse the day rows back out of [`MetricsReport::to_csv`] output;
    /// aggregate footers are recomputed, not trusted.
    pub fn from_csv(text: &str) -> Result<MetricsReport> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse {
            offset: 0,
            detail: "empty metrics CSV".into(),
        })?;
        if header != "date,mae,rmse,pearson,ssim,pod,far,ts" {
            return Err(Error::Parse {
                offset: 0,
                detail: format!("unexpected metrics CSV header {header:?}"),
            });
        }
        let mut days = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 8 {
                return Err(Error::Parse {
                    offset: 0,
                    detail: format!("expected 8 cells, got {} in {line:?}", cells.len()),
                });
            }
            let Ok(date) = cells[0].parse::<NaiveDate>() else {
                continue; // aggregate footer row
            };
            days.push(DayMetrics {
                date,
                mae: num(cells[1])?,
                rmse: num(cells[2])?,
                pearson: opt_num(cells[3])?,
                ssim: num(cells[4])?,
                pod: opt_num(cells[5])?,
                far: opt_num(cells[6])?,
                ts: opt_num(cells[7])?,
            });
        }
        Ok(MetricsReport { days })
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn num(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse {
        offset: 0,
        detail: format!("bad number {s:?}"),
    })
}

fn opt_num(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        num(s).map(Some)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn median(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Units;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(h: usize, w: usize, values: Vec<f32>) -> GridField {
        GridField::from_values(h, w, values, Units::MmPerDay).unwrap()
    }

    fn full(n: usize) -> Vec<bool> {
        vec![true; n]
    }

    #[test]
    fn mae_identity_and_hand_case() {
        let a = grid(1, 2, vec![1.0, 2.0]);
        assert_eq!(mae(&a, &a, &full(2)).unwrap(), 0.0);
        let b = grid(1, 2, vec![1.0, 4.0]);
        assert_eq!(mae(&a, &b, &full(2)).unwrap(), 1.0);
    }

    #[test]
    fn mae_matches_direct_sum_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (h, w) = (6, 7);
        let pv: Vec<f32> = (0..h * w).map(|_| rng.gen_range(0.0f32..30.0)).collect();
        let ov: Vec<f32> = (0..h * w).map(|_| rng.gen_range(0.0f32..30.0)).collect();
        let mask: Vec<bool> = (0..h * w).map(|_| rng.gen_bool(0.7)).collect();
        let got = mae(&grid(h, w, pv.clone()), &grid(h, w, ov.clone()), &mask).unwrap();
        let mut acc = 0.0f64;
        let mut n = 0usize;
        for i in 0..h * w {
            if mask[i] {
                acc += (f64::from(pv[i]) - f64::from(ov[i])).abs();
                n += 1;
            }
        }
        assert_eq!(got, acc / n as f64);
    }

    #[test]
    fn rmse_hand_case_and_dominates_mae() {
        let p = grid(1, 2, vec![0.0, 0.0]);
        let o = grid(1, 2, vec![3.0, 4.0]);
        assert!((rmse(&p, &o, &full(2)).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let pv: Vec<f32> = (0..8).map(|_| rng.gen_range(0.0f32..50.0)).collect();
            let ov: Vec<f32> = (0..8).map(|_| rng.gen_range(0.0f32..50.0)).collect();
            let p = grid(2, 4, pv);
            let o = grid(2, 4, ov);
            let m = full(8);
            assert!(mae(&p, &o, &m).unwrap() <= rmse(&p, &o, &m).unwrap() + 1e-12);
        }
    }

    #[test]
    fn empty_mask_rejected() {
        let a = grid(1, 2, vec![1.0, 2.0]);
        assert!(matches!(
            mae(&a, &a, &[false, false]),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn pearson_affine_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pv: Vec<f32> = (0..20).map(|_| rng.gen_range(0.0f32..10.0)).collect();
        let ov: Vec<f32> = pv.iter().map(|&v| 2.0 * v + 3.0).collect();
        let nv: Vec<f32> = pv.iter().map(|&v| -v).collect();
        let p = grid(4, 5, pv);
        let r = pearson(&p, &grid(4, 5, ov), &full(20)).unwrap().unwrap();
        assert!((r - 1.0).abs() < 1e-9);
        let r2 = pearson(&p, &grid(4, 5, nv), &full(20)).unwrap().unwrap();
        assert!((r2 + 1.0).abs() < 1e-9);
    }

    #[test]
    fn pearson_matches_covariance_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pv: Vec<f32> = (0..30).map(|_| rng.gen_range(0.0f32..20.0)).collect();
        let ov: Vec<f32> = (0..30).map(|_| rng.gen_range(0.0f32..20.0)).collect();
        let got = pearson(&grid(5, 6, pv.clone()), &grid(5, 6, ov.clone()), &full(30))
            .unwrap()
            .unwrap();
        let n = 30.0f64;
        let mx = pv.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
        let my = ov.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
        let cov = pv
            .iter()
            .zip(&ov)
            .map(|(&a, &b)| (f64::from(a) - mx) * (f64::from(b) - my))
            .sum::<f64>()
            / n;
        let sx = (pv.iter().map(|&v| (f64::from(v) - mx).powi(2)).sum::<f64>() / n).sqrt();
        let sy = (ov.iter().map(|&v| (f64::from(v) - my).powi(2)).sum::<f64>() / n).sqrt();
        assert!((got - cov / (sx * sy)).abs() < 1e-6);
    }

    #[test]
    fn pearson_zero_variance_undefined() {
        let c = grid(1, 4, vec![2.0; 4]);
        let v = grid(1, 4, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(pearson(&c, &v, &full(4)).unwrap(), None);
        assert_eq!(pearson(&v, &c, &full(4)).unwrap(), None);
    }

    #[test]
    fn ssim_self_is_one_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let av: Vec<f32> = (0..15 * 12).map(|_| rng.gen_range(0.0f32..25.0)).collect();
        let bv: Vec<f32> = (0..15 * 12).map(|_| rng.gen_range(0.0f32..25.0)).collect();
        let a = grid(15, 12, av);
        let b = grid(15, 12, bv);
        let m = full(15 * 12);
        assert_eq!(ssim(&a, &a, &m).unwrap(), 1.0);
        let ab = ssim(&a, &b, &m).unwrap();
        let ba = ssim(&b, &a, &m).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        assert!(ab < 1.0);
    }

    #[test]
    fn ssim_constant_fields_closed_form() {
        let c1v = 1.0f32;
        let c2v = 1.2f32;
        let a = grid(8, 8, vec![c1v; 64]);
        let b = grid(8, 8, vec![c2v; 64]);
        let got = ssim(&a, &b, &full(64)).unwrap();
        let l = f64::from(c2v).max(1.0);
        let c1 = (0.01 * l).powi(2);
        let want = (2.0 * f64::from(c1v) * f64::from(c2v) + c1)
            / (f64::from(c1v).powi(2) + f64::from(c2v).powi(2) + c1);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn ssim_dynamic_range_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let av: Vec<f32> = (0..100).map(|_| rng.gen_range(5.0f32..6.0)).collect();
        let bv: Vec<f32> = av.iter().map(|&v| v + rng.gen_range(-0.3f32..0.3)).collect();
        let a = grid(10, 10, av);
        let b = grid(10, 10, bv);
        let m = full(100);
        let s1 = ssim_with_dynamic_range(&a, &b, &m, 10.0).unwrap();
        let s2 = ssim_with_dynamic_range(&a, &b, &m, 20.0).unwrap();
        assert!(s2 > s1, "{s2} vs {s1}");
        assert!(s2 < 1.0);
    }

    #[test]
    fn indicators_all_wet_prediction() {
        let p = grid(1, 4, vec![5.0; 4]);
        let o = grid(1, 4, vec![0.0, 3.0, 0.05, 1.0]);
        let (pod, far, ts) = forecast_indicators(&p, &o, &full(4), WET_THRESHOLD_MM).unwrap();
        assert_eq!(pod, Some(1.0));
        assert_eq!(far, Some(0.5));
        assert_eq!(ts, Some(0.5));
    }

    #[test]
    fn indicators_perfect_prediction() {
        let o = grid(1, 4, vec![0.0, 3.0, 0.0, 1.0]);
        let (pod, far, ts) = forecast_indicators(&o, &o, &full(4), WET_THRESHOLD_MM).unwrap();
        assert_eq!((pod, far, ts), (Some(1.0), Some(0.0), Some(1.0)));
    }

    #[test]
    fn indicators_hand_counts() {
        // H=3, M=1, F=1, N=1
        let p = grid(1, 6, vec![1.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
        let o = grid(1, 6, vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        let c = Contingency::from_fields(&p, &o, &full(6), WET_THRESHOLD_MM).unwrap();
        assert_eq!(
            (c.hits, c.misses, c.false_alarms, c.correct_negatives),
            (3, 1, 1, 1)
        );
        assert_eq!(c.total(), 6);
        assert_eq!(c.pod(), Some(0.75));
        assert_eq!(c.far(), Some(0.25));
        assert_eq!(c.ts(), Some(0.6));
    }

    #[test]
    fn indicators_undefined_denominators() {
        let dry = grid(1, 3, vec![0.0; 3]);
        let c = Contingency::from_fields(&dry, &dry, &full(3), WET_THRESHOLD_MM).unwrap();
        assert_eq!(c.pod(), None);
        assert_eq!(c.far(), None);
        assert_eq!(c.ts(), None);
    }

    #[test]
    fn report_csv_round_trip_and_aggregates() {
        let d1 = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        let d2 = NaiveDate::from_ymd_opt(2000, 1, 2).unwrap();
        let days = vec![
            DayMetrics {
                date: d1,
                mae: 1.0,
                rmse: 2.0,
                pearson: Some(0.5),
                ssim: 0.9,
                pod: None,
                far: Some(0.25),
                ts: Some(0.5),
            },
            DayMetrics {
                date: d2,
                mae: 3.0,
                rmse: 4.0,
                pearson: None,
                ssim: 0.7,
                pod: Some(1.0),
                far: Some(0.75),
                ts: Some(0.25),
            },
        ];
        let report = MetricsReport::new(days.clone());
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 1 + 2 + 2); // header + days + mean/median
        let parsed = MetricsReport::from_csv(&csv).unwrap();
        assert_eq!(parsed.days.len(), 2);
        assert_eq!(parsed.days[0].pod, None);
        assert_eq!(parsed.days[1].pearson, None);
        let mean = report.mean();
        assert_eq!(mean.mae, 2.0);
        assert_eq!(mean.pearson, Some(0.5)); // only the defined day counts
        assert_eq!(mean.pod, Some(1.0));
        let med = report.median();
        assert_eq!(med.mae, 2.0);
        assert_eq!(med.far, Some(0.5));
    }
}
