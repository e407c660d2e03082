//! The attention super-resolution network: a convolutional backbone with
//! residual attention blocks tapped every couple of layers, 1x1 shrinkage
//! convolutions feeding a fusion layer, a local residual over the input,
//! one-step upscaling (pixel shuffle by default), and a high-resolution
//! fusion head that concatenates terrain and the interpolated input.
//!
//! Parameters are plain tensors owned by the model; each forward pass
//! copies them onto a fresh tape, so training never mutates a recorded
//! tensor in place.

use crate::error::{Error, Result};
use crate::layers::{
    conv2d, crop_or_pad, he_uniform, pixel_shuffle, pool, resample, transposed_conv2d, PoolKind,
    ResampleMethod, ResampleSpec,
};
use crate::tensor::{Tape, Tensor, TensorId};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::fs;
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ASRW";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub scale_factor: usize,
    pub backbone_layers: usize,
    pub filters: usize,
    pub backbone_kernel: usize,
    pub sab_kernel: usize,
    pub shrink_kernel: usize,
    pub shrink_channels: usize,
    pub cab_mlp_nodes: usize,
    pub cab_reduction: f64,
    /// A residual attention block taps the spine after this many convs.
    pub rab_every: usize,
    pub head_layers: usize,
    /// (rows, cols) of the final output.
    pub target_shape: (usize, usize),
    pub upscale: ResampleMethod,
    pub use_topography: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            scale_factor: 5,
            backbone_layers: 32,
            filters: 64,
            backbone_kernel: 3,
            sab_kernel: 5,
            shrink_kernel: 1,
            shrink_channels: 16,
            cab_mlp_nodes: 256,
            cab_reduction: 0.5,
            rab_every: 2,
            head_layers: 3,
            target_shape: (66, 41),
            upscale: ResampleMethod::PixelShuffle,
            use_topography: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scale_factor == 0 {
            return Err(Error::Config("scale factor must be >= 1".into()));
        }
        if self.rab_every == 0 || self.backbone_layers == 0 {
            return Err(Error::Config("backbone and attention cadence must be >= 1".into()));
        }
        if self.backbone_layers % self.rab_every != 0 {
            return Err(Error::Config(format!(
                "backbone layers {} must be a multiple of the attention cadence {}",
                self.backbone_layers, self.rab_every
            )));
        }
        if self.filters == 0 || self.shrink_channels == 0 || self.head_layers == 0 {
            return Err(Error::Config("channel widths must be >= 1".into()));
        }
        for k in [self.backbone_kernel, self.sab_kernel, self.shrink_kernel] {
            if k % 2 == 0 {
                return Err(Error::Config(format!("kernel extents must be odd, got {k}")));
            }
        }
        if self.cab_mlp_nodes == 0 || self.cab_hidden() == 0 {
            return Err(Error::Config("attention MLP widths must be >= 1".into()));
        }
        if self.target_shape.0 == 0 || self.target_shape.1 == 0 {
            return Err(Error::Config("target shape must be positive".into()));
        }
        Ok(())
    }

    pub fn n_rabs(&self) -> usize {
        self.backbone_layers / self.rab_every
    }

    pub fn cab_hidden(&self) -> usize {
        (self.cab_mlp_nodes as f64 * self.cab_reduction).round() as usize
    }

    /// Channels entering the high-resolution fusion conv: upscaled main
    /// path, interpolated input, and optionally terrain.
    pub fn fusion2_inputs(&self) -> usize {
        2 + usize::from(self.use_topography)
    }

    /// Canonical key=value form; the checkpoint digest is computed over it.
    pub fn canonical_text(&self) -> String {
        format!(
            "scale_factor={}\nbackbone_layers={}\nfilters={}\nbackbone_kernel={}\n\
             sab_kernel={}\nshrink_kernel={}\nshrink_channels={}\ncab_mlp_nodes={}\n\
             cab_reduction={}\nrab_every={}\nhead_layers={}\ntarget_h={}\ntarget_w={}\n\
             upscale={}\nuse_topography={}\n",
            self.scale_factor,
            self.backbone_layers,
            self.filters,
            self.backbone_kernel,
            self.sab_kernel,
            self.shrink_kernel,
            self.shrink_channels,
            self.cab_mlp_nodes,
            self.cab_reduction,
            self.rab_every,
            self.head_layers,
            self.target_shape.0,
            self.target_shape.1,
            self.upscale.name(),
            self.use_topography,
        )
    }

    pub fn from_canonical_text(text: &str) -> Result<ModelConfig> {
        let mut map = HashMap::new();
        for line in text.lines() {
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                offset: 0,
                detail: format!("bad config line {line:?}"),
            })?;
            map.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| -> Result<String> {
            map.get(k).cloned().ok_or_else(|| Error::Parse {
                offset: 0,
                detail: format!("missing config key {k}"),
            })
        };
        let parse_usize = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|_| Error::Parse {
                offset: 0,
                detail: format!("bad value for {k}"),
            })
        };
        Ok(ModelConfig {
            scale_factor: parse_usize("scale_factor")?,
            backbone_layers: parse_usize("backbone_layers")?,
            filters: parse_usize("filters")?,
            backbone_kernel: parse_usize("backbone_kernel")?,
            sab_kernel: parse_usize("sab_kernel")?,
            shrink_kernel: parse_usize("shrink_kernel")?,
            shrink_channels: parse_usize("shrink_channels")?,
            cab_mlp_nodes: parse_usize("cab_mlp_nodes")?,
            cab_reduction: get("cab_reduction")?.parse().map_err(|_| Error::Parse {
                offset: 0,
                detail: "bad value for cab_reduction".into(),
            })?,
            rab_every: parse_usize("rab_every")?,
            head_layers: parse_usize("head_layers")?,
            target_shape: (parse_usize("target_h")?, parse_usize("target_w")?),
            upscale: ResampleMethod::parse(&get("upscale")?)?,
            use_topography: get("use_topography")? == "true",
        })
    }

    pub fn digest(&self) -> u64 {
        fnv1a64(self.canonical_text().as_bytes())
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub tensor: Tensor,
}

fn push_conv(
    specs: &mut Vec<(String, Vec<usize>)>,
    name: &str,
    kh: usize,
    kw: usize,
    ci: usize,
    co: usize,
) {
    specs.push((format!("{name}.kernel"), vec![kh, kw, ci, co]));
    specs.push((format!("{name}.bias"), vec![co]));
}

/// Named parameter shapes in registration order, derived only from config.
fn param_specs(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let f = cfg.filters;
    let bk = cfg.backbone_kernel;
    let mut specs: Vec<(String, Vec<usize>)> = Vec::new();
    push_conv(&mut specs, "input", bk, bk, 1, f);
    for block in 0..cfg.n_rabs() {
        for k in 0..cfg.rab_every {
            let li = block * cfg.rab_every + k;
            push_conv(&mut specs, &format!("backbone.{li}"), bk, bk, f, f);
        }
        // shared MLP of the channel attention block
        let nodes = cfg.cab_mlp_nodes;
        let hidden = cfg.cab_hidden();
        specs.push((format!("rab.{block}.cab.fc0.weight"), vec![f, nodes]));
        specs.push((format!("rab.{block}.cab.fc0.bias"), vec![1, nodes]));
        specs.push((format!("rab.{block}.cab.fc1.weight"), vec![nodes, hidden]));
        specs.push((format!("rab.{block}.cab.fc1.bias"), vec![1, hidden]));
        specs.push((format!("rab.{block}.cab.fc2.weight"), vec![hidden, f]));
        specs.push((format!("rab.{block}.cab.fc2.bias"), vec![1, f]));
        push_conv(
            &mut specs,
            &format!("rab.{block}.sab"),
            cfg.sab_kernel,
            cfg.sab_kernel,
            2,
            1,
        );
        push_conv(
            &mut specs,
            &format!("shrink.{block}"),
            cfg.shrink_kernel,
            cfg.shrink_kernel,
            f,
            cfg.shrink_channels,
        );
    }
    push_conv(
        &mut specs,
        "fusion1",
        bk,
        bk,
        cfg.shrink_channels * cfg.n_rabs(),
        f,
    );
    push_conv(&mut specs, "project", bk, bk, f, 1);
    match cfg.upscale {
        ResampleMethod::PixelShuffle => {
            let r2 = cfg.scale_factor * cfg.scale_factor;
            push_conv(&mut specs, "upscale.pre", bk, bk, 1, r2);
        }
        ResampleMethod::Deconv => push_conv(&mut specs, "upscale.deconv", bk, bk, 1, 1),
        ResampleMethod::Bilinear | ResampleMethod::Bicubic => {}
    }
    push_conv(&mut specs, "upscale.post", bk, bk, 1, 1);
    push_conv(&mut specs, "fusion2", bk, bk, cfg.fusion2_inputs(), f);
    for i in 0..cfg.head_layers - 1 {
        push_conv(&mut specs, &format!("head.{i}"), bk, bk, f, f);
    }
    push_conv(&mut specs, &format!("head.{}", cfg.head_layers - 1), bk, bk, f, 1);
    specs
}

/// Ids of the parameter leaves inserted for one forward pass, aligned with
/// the model's parameter order.
pub struct ForwardPass {
    pub output: TensorId,
    pub param_ids: Vec<TensorId>,
}

/// The network: configuration plus an ordered, named parameter collection.
#[derive(Debug, Clone)]
pub struct AttentionSRModel {
    config: ModelConfig,
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl AttentionSRModel {
    /// Deterministically initialize all parameters from the seed:
    /// He-uniform kernels and dense weights, zero biases.
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for (name, shape) in param_specs(&config) {
            let tensor = if name.ends_with(".bias") {
                Tensor::zeros(shape)
            } else {
                let fan_in = match shape.len() {
                    4 => shape[0] * shape[1] * shape[2],
                    2 => shape[0],
                    _ => shape.iter().product(),
                };
                he_uniform(&mut rng, &shape, fan_in)
            };
            params.push(Param {
                name,
                tensor: tensor.with_requires_grad(),
            });
        }
        let index = params
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.clone(), i))
            .collect();
        Ok(AttentionSRModel {
            config,
            params,
            index,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.tensor.numel()).sum()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn snapshot(&self) -> Vec<Vec<f32>> {
        self.params.iter().map(|p| p.tensor.data().to_vec()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Vec<f32>]) {
        assert_eq!(snapshot.len(), self.params.len());
        for (p, s) in self.params.iter_mut().zip(snapshot) {
            p.tensor.data_mut().copy_from_slice(s);
        }
    }

    fn id(&self, pids: &[TensorId], name: &str) -> TensorId {
        pids[self.index[name]]
    }

    fn conv_block(
        &self,
        tape: &mut Tape,
        pids: &[TensorId],
        name: &str,
        x: TensorId,
        relu: bool,
    ) -> Result<TensorId> {
        let y = conv2d(
            tape,
            x,
            self.id(pids, &format!("{name}.kernel")),
            self.id(pids, &format!("{name}.bias")),
            1,
        )?;
        if relu {
            tape.relu(y)
        } else {
            Ok(y)
        }
    }

    /// Channel attention: shared MLP over global max and average pools,
    /// sigmoid-gated; returns `[n, 1, 1, c]` with entries in (0, 1).
    pub fn cab_forward(
        &self,
        tape: &mut Tape,
        f: TensorId,
        pids: &[TensorId],
        block: usize,
    ) -> Result<TensorId> {
        let shape = tape.value(f).shape().to_vec();
        if shape[3] != self.config.filters {
            return Err(Error::shape(
                "cab_forward",
                format!("channels {} vs filters {}", shape[3], self.config.filters),
            ));
        }
        let n = shape[0];
        let c = shape[3];
        let mlp = |tape: &mut Tape, v: TensorId, this: &Self| -> Result<TensorId> {
            let mut t = v;
            for (li, act) in [(0, true), (1, true), (2, false)] {
                let w = this.id(pids, &format!("rab.{block}.cab.fc{li}.weight"));
                let b = this.id(pids, &format!("rab.{block}.cab.fc{li}.bias"));
                t = tape.matmul(t, w)?;
                t = tape.add(t, b)?;
                if act {
                    t = tape.relu(t)?;
                }
            }
            Ok(t)
        };
        let gmax = pool(tape, PoolKind::GlobalMax, f)?;
        let gmax = tape.reshape(gmax, &[n, c])?;
        let gavg = pool(tape, PoolKind::GlobalAvg, f)?;
        let gavg = tape.reshape(gavg, &[n, c])?;
        let pm = mlp(tape, gmax, self)?;
        let pa = mlp(tape, gavg, self)?;
        let s = tape.add(pm, pa)?;
        let m = tape.sigmoid(s)?;
        tape.reshape(m, &[n, 1, 1, c])
    }

    /// Spatial attention: channel-wise max/avg pool pair, concatenation,
    /// one convolution, sigmoid; returns `[n, h, w, 1]` in (0, 1).
    pub fn sab_forward(
        &self,
        tape: &mut Tape,
        f: TensorId,
        pids: &[TensorId],
        block: usize,
    ) -> Result<TensorId> {
        let cmax = pool(tape, PoolKind::ChannelMax, f)?;
        let cavg = pool(tape, PoolKind::ChannelAvg, f)?;
        let cat = tape.concat(&[cmax, cavg], 3)?;
        let conv = conv2d(
            tape,
            cat,
            self.id(pids, &format!("rab.{block}.sab.kernel")),
            self.id(pids, &format!("rab.{block}.sab.bias")),
            1,
        )?;
        tape.sigmoid(conv)
    }

    /// Residual attention block: sequential channel-then-spatial gating with
    /// a skip from the input, `F' = F + M_s * (M_c * F)`.
    pub fn rab_forward(
        &self,
        tape: &mut Tape,
        f: TensorId,
        pids: &[TensorId],
        block: usize,
    ) -> Result<TensorId> {
        self.rab_forward_with_gate(tape, f, pids, block, None)
    }

    /// Test hook: optionally scale the attention branch before the residual
    /// add (zero gate turns the block into the identity map).
    pub fn rab_forward_with_gate(
        &self,
        tape: &mut Tape,
        f: TensorId,
        pids: &[TensorId],
        block: usize,
        branch_gate: Option<TensorId>,
    ) -> Result<TensorId> {
        let mc = self.cab_forward(tape, f, pids, block)?;
        let fc = tape.mul(f, mc)?;
        let ms = self.sab_forward(tape, fc, pids, block)?;
        let mut gated = tape.mul(fc, ms)?;
        if let Some(gate) = branch_gate {
            gated = tape.mul(gated, gate)?;
        }
        tape.add(f, gated)
    }

    /// Run the network on a tape, returning the output id and the parameter
    /// leaf ids (aligned with `params()`) for gradient extraction.
    pub fn forward_on(
        &self,
        tape: &mut Tape,
        x_lr: &Tensor,
        elevation: Option<&Tensor>,
    ) -> Result<ForwardPass> {
        let xs = x_lr.shape();
        if xs.len() != 4 || xs[3] != 1 {
            return Err(Error::shape(
                "forward",
                format!("expected [n,h,w,1] input, got {xs:?}"),
            ));
        }
        let n = xs[0];
        let (th, tw) = self.config.target_shape;
        let r = self.config.scale_factor;

        let elev_id = if self.config.use_topography {
            let e = elevation.ok_or_else(|| {
                Error::Config("model was built with topography; elevation input required".into())
            })?;
            let es = e.shape();
            if es.len() != 4 || es[1] != th || es[2] != tw || es[3] != 1 {
                return Err(Error::shape(
                    "forward",
                    format!("elevation {es:?} vs target {th}x{tw}"),
                ));
            }
            let tiled = if es[0] == n {
                e.clone()
            } else if es[0] == 1 {
                let mut data = Vec::with_capacity(n * th * tw);
                for _ in 0..n {
                    data.extend_from_slice(e.data());
                }
                Tensor::new(vec![n, th, tw, 1], data)?
            } else {
                return Err(Error::shape(
                    "forward",
                    format!("elevation batch {} vs input batch {n}", es[0]),
                ));
            };
            Some(tape.leaf(tiled))
        } else {
            None
        };

        let pids: Vec<TensorId> = self
            .params
            .iter()
            .map(|p| tape.leaf(p.tensor.clone()))
            .collect();
        let x = tape.leaf(x_lr.clone());

        // spine with attention taps
        let mut t = self.conv_block(tape, &pids, "input", x, true)?;
        let mut taps = Vec::with_capacity(self.config.n_rabs());
        for block in 0..self.config.n_rabs() {
            for k in 0..self.config.rab_every {
                let li = block * self.config.rab_every + k;
                t = self.conv_block(tape, &pids, &format!("backbone.{li}"), t, true)?;
            }
            t = self.rab_forward(tape, t, &pids, block)?;
            let tap = self.conv_block(tape, &pids, &format!("shrink.{block}"), t, true)?;
            taps.push(tap);
        }
        let cat = tape.concat(&taps, 3)?;
        let fused = self.conv_block(tape, &pids, "fusion1", cat, true)?;
        // 1-channel projection stays linear so the residual can subtract
        let correction = self.conv_block(tape, &pids, "project", fused, false)?;
        let corrected = tape.add(correction, x)?;

        let up = match self.config.upscale {
            ResampleMethod::PixelShuffle => {
                let pre = self.conv_block(tape, &pids, "upscale.pre", corrected, false)?;
                pixel_shuffle(tape, pre, r)?
            }
            ResampleMethod::Deconv => transposed_conv2d(
                tape,
                corrected,
                self.id(&pids, "upscale.deconv.kernel"),
                self.id(&pids, "upscale.deconv.bias"),
                r,
            )?,
            method @ (ResampleMethod::Bilinear | ResampleMethod::Bicubic) => {
                resample(tape, corrected, &ResampleSpec { method, factor: r })?
            }
        };
        let up = self.conv_block(tape, &pids, "upscale.post", up, false)?;
        let up = crop_or_pad(tape, up, (th, tw))?;

        let interp = resample(
            tape,
            x,
            &ResampleSpec {
                method: ResampleMethod::Bilinear,
                factor: r,
            },
        )?;
        let interp = crop_or_pad(tape, interp, (th, tw))?;

        let mut parts = vec![up];
        if let Some(e) = elev_id {
            parts.push(e);
        }
        parts.push(interp);
        let cat2 = tape.concat(&parts, 3)?;
        let mut head = self.conv_block(tape, &pids, "fusion2", cat2, true)?;
        for i in 0..self.config.head_layers - 1 {
            head = self.conv_block(tape, &pids, &format!("head.{i}"), head, true)?;
        }
        let out = self.conv_block(
            tape,
            &pids,
            &format!("head.{}", self.config.head_layers - 1),
            head,
            false,
        )?;
        Ok(ForwardPass {
            output: out,
            param_ids: pids,
        })
    }

    /// Convenience forward returning the output tensor.
    pub fn forward(&self, x_lr: &Tensor, elevation: Option<&Tensor>) -> Result<Tensor> {
        let mut tape = Tape::new();
        let pass = self.forward_on(&mut tape, x_lr, elevation)?;
        Ok(tape.value(pass.output).clone())
    }

    // ---- checkpoint I/O -------------------------------------------------

    /// Versioned binary checkpoint: magic, format version, config digest,
    /// the canonical config text, then named little-endian f32 blocks.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.config.digest().to_le_bytes());
        let cfg = self.config.canonical_text();
        out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        out.extend_from_slice(cfg.as_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in &self.params {
            let name = p.name.as_bytes();
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name);
            out.push(p.tensor.shape().len() as u8);
            for &d in p.tensor.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in p.tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let mut r = Reader::new(&bytes);
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Parse {
                offset: 0,
                detail: "bad checkpoint magic".into(),
            });
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Parse {
                offset: 4,
                detail: format!("unsupported checkpoint version {version}"),
            });
        }
        let stored_digest = r.u64()?;
        let cfg_len = r.u32()? as usize;
        let cfg_text = std::str::from_utf8(r.take(cfg_len)?).map_err(|_| Error::Parse {
            offset: r.at,
            detail: "config block is not UTF-8".into(),
        })?;
        let config = ModelConfig::from_canonical_text(cfg_text)?;
        if config.digest() != stored_digest {
            return Err(Error::Parse {
                offset: 8,
                detail: "config digest mismatch".into(),
            });
        }
        config.validate()?;
        let specs = param_specs(&config);
        let count = r.u32()? as usize;
        if count != specs.len() {
            return Err(Error::Parse {
                offset: r.at,
                detail: format!("expected {} parameter blocks, got {count}", specs.len()),
            });
        }
        let mut params = Vec::with_capacity(count);
        for (want_name, want_shape) in specs {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Parse {
                    offset: r.at,
                    detail: "parameter name is not UTF-8".into(),
                })?
                .to_string();
            if name != want_name {
                return Err(Error::Parse {
                    offset: r.at,
                    detail: format!("parameter {name:?} where {want_name:?} expected"),
                });
            }
            let rank = r.u8()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            if shape != want_shape {
                return Err(Error::Parse {
                    offset: r.at,
                    detail: format!("parameter {name} shape {shape:?} vs {want_shape:?}"),
                });
            }
            let numel: usize = shape.iter().product();
            let raw = r.take(4 * numel)?;
            let data: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            params.push(Param {
                name,
                tensor: Tensor::new(shape, data)?.with_requires_grad(),
            });
        }
        let index = params
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.clone(), i))
            .collect();
        Ok(AttentionSRModel {
            config,
            params,
            index,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, at: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(Error::Parse {
                offset: self.bytes.len(),
                detail: format!("truncated checkpoint: wanted {n} bytes at {}", self.at),
            });
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
