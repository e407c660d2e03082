pub mod baseline;
pub mod compare;
pub mod eval;
pub mod synth;
pub mod train;

use anyhow::{bail, Result};
use downscale_core::data::split_indices;

/// Indices of the requested split under the shared 80/10/10 convention.
pub fn select_split(n: usize, seed: u64, which: &str) -> Result<Vec<usize>> {
    if which == "all" {
        return Ok((0..n).collect());
    }
    let (train, val, test) = split_indices(n, seed)?;
    Ok(match which {
        "train" => train,
        "val" => val,
        "test" => test,
        other => bail!("unknown split {other:?}; use train, val, test, or all"),
    })
}

pub fn parse_shape(s: &str) -> Result<(usize, usize)> {
    let Some((h, w)) = s.split_once('x') else {
        bail!("expected ROWSxCOLS, got {s:?}");
    };
    Ok((h.trim().parse()?, w.trim().parse()?))
}

pub fn parse_pair(s: &str) -> Result<(isize, isize)> {
    let Some((a, b)) = s.split_once(',') else {
        bail!("expected DROW,DCOL, got {s:?}");
    };
    Ok((a.trim().parse()?, b.trim().parse()?))
}

pub fn parse_range(s: &str) -> Result<(usize, usize)> {
    let Some((a, b)) = s.split_once('-') else {
        bail!("expected MIN-MAX, got {s:?}");
    };
    Ok((a.trim().parse()?, b.trim().parse()?))
}
