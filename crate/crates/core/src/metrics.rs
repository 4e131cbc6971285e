//! Static parameter and FLOP accounting.
//!
//! FLOPs count multiply-accumulates of convolutional and dense layers (one
//! MAC = one FLOP); bias, normalization and activation costs are excluded.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::nn::{Layer, MaskPosition, Network};

pub const PRESETS: &[&str] = &["resnet20-cifar", "resnet32-cifar", "resnet56-cifar", "resnet110-cifar"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// Convolution without bias.
    Conv,
    /// Convolution with one bias per filter.
    ConvBias,
    /// Fully connected layer with bias; `n_filters` = output units.
    Dense,
    /// Batch normalization with γ and β per channel.
    BatchNorm,
}

impl LayerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::ConvBias => "convb",
            LayerKind::Dense => "dense",
            LayerKind::BatchNorm => "bn",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "conv" => LayerKind::Conv,
            "convb" => LayerKind::ConvBias,
            "dense" => LayerKind::Dense,
            "bn" => LayerKind::BatchNorm,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub n_filters: usize,
    pub in_channels: usize,
    pub kernel: usize,
    pub out_h: Option<usize>,
    pub out_w: Option<usize>,
    /// Layer whose output channels this layer consumes one-to-one, if any.
    /// Removing filters there removes input channels here.
    pub input_from: Option<usize>,
}

impl LayerSpec {
    pub fn conv(n_filters: usize, in_channels: usize, kernel: usize, out_hw: usize) -> Self {
        Self {
            kind: LayerKind::Conv,
            n_filters,
            in_channels,
            kernel,
            out_h: Some(out_hw),
            out_w: Some(out_hw),
            input_from: None,
        }
    }

    pub fn dense(out_units: usize, in_units: usize) -> Self {
        Self {
            kind: LayerKind::Dense,
            n_filters: out_units,
            in_channels: in_units,
            kernel: 1,
            out_h: Some(1),
            out_w: Some(1),
            input_from: None,
        }
    }

    fn batch_norm(channels: usize, out_h: usize, out_w: usize) -> Self {
        Self {
            kind: LayerKind::BatchNorm,
            n_filters: channels,
            in_channels: channels,
            kernel: 1,
            out_h: Some(out_h),
            out_w: Some(out_w),
            input_from: None,
        }
    }

    fn from(mut self, layer: usize) -> Self {
        self.input_from = Some(layer);
        self
    }

    /// Parameters of one filter (one output unit).
    pub fn params_per_filter(&self) -> u64 {
        match self.kind {
            LayerKind::Conv => (self.in_channels * self.kernel * self.kernel) as u64,
            LayerKind::ConvBias => (self.in_channels * self.kernel * self.kernel) as u64 + 1,
            LayerKind::Dense => self.in_channels as u64 + 1,
            LayerKind::BatchNorm => 2,
        }
    }

    pub fn params(&self) -> u64 {
        self.n_filters as u64 * self.params_per_filter()
    }

    /// MACs of one filter over its whole output map.
    pub fn flops_per_filter(&self) -> Result<u64> {
        let (Some(h), Some(w)) = (self.out_h, self.out_w) else {
            return Err(Error::InvalidConfig("layer has no output spatial size".into()));
        };
        Ok(match self.kind {
            LayerKind::Conv | LayerKind::ConvBias => (self.in_channels * self.kernel * self.kernel * h * w) as u64,
            LayerKind::Dense => self.in_channels as u64,
            LayerKind::BatchNorm => 0,
        })
    }

    pub fn flops(&self) -> Result<u64> {
        Ok(self.n_filters as u64 * self.flops_per_filter()?)
    }
}

/// Ordered layer-shape table.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ArchDescriptor {
    pub layers: Vec<LayerSpec>,
}

impl ArchDescriptor {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let d = Self { layers };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            if l.n_filters == 0 || l.in_channels == 0 || l.kernel == 0 {
                return Err(Error::Descriptor {
                    line: i + 1,
                    msg: "filters, in_channels and kernel must be positive".into(),
                });
            }
            if let Some(src) = l.input_from {
                let ok = src < i && self.layers[src].n_filters == l.in_channels;
                if !ok {
                    return Err(Error::Descriptor {
                        line: i + 1,
                        msg: format!("input channels do not compose with layer {src}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Parses the line format `kind filters in_channels kernel out_h out_w
    /// [from=<layer>]`. `kind` is one of `conv`, `convb`, `dense`, `bn`;
    /// `-` marks an unknown spatial size; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut layers = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Descriptor { line: lineno + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !(6..=7).contains(&fields.len()) {
                return Err(err(format!("expected 6 or 7 fields, got {}", fields.len())));
            }
            let kind = LayerKind::parse(fields[0]).ok_or_else(|| err(format!("unknown kind `{}`", fields[0])))?;
            let num = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad number `{s}`")));
            let size = |s: &str| if s == "-" { Ok(None) } else { num(s).map(Some) };
            let input_from = match fields.get(6) {
                Some(f) => Some(num(f.strip_prefix("from=").ok_or_else(|| err(format!("bad field `{f}`")))?)?),
                None => None,
            };
            layers.push(LayerSpec {
                kind,
                n_filters: num(fields[1])?,
                in_channels: num(fields[2])?,
                kernel: num(fields[3])?,
                out_h: size(fields[4])?,
                out_w: size(fields[5])?,
                input_from,
            });
        }
        Self::new(layers)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# kind filters in_channels kernel out_h out_w [from=<layer>]\n");
        let size = |v: Option<usize>| v.map_or("-".to_string(), |v| v.to_string());
        for l in &self.layers {
            let _ = write!(
                s,
                "{} {} {} {} {} {}",
                l.kind.as_str(),
                l.n_filters,
                l.in_channels,
                l.kernel,
                size(l.out_h),
                size(l.out_w)
            );
            if let Some(f) = l.input_from {
                let _ = write!(s, " from={f}");
            }
            s.push('\n');
        }
        s
    }

    /// Shape table of a live network: every convolution, batch norm and dense
    /// layer in forward order (residual blocks expand to their four layers).
    pub fn from_network(net: &Network) -> Self {
        let shapes = net.layer_shapes().expect("network validated at construction");
        let mut layers = Vec::new();
        for (layer, out) in net.layers().iter().zip(&shapes[1..]) {
            match layer {
                Layer::Dense(d) => layers.push(LayerSpec::dense(d.out_units(), d.in_units())),
                Layer::Conv2d(c) => layers.push(LayerSpec {
                    kind: LayerKind::ConvBias,
                    ..LayerSpec::conv(c.n_filters(), c.in_channels(), c.kernel(), 0)
                }
                .with_hw(out[1], out[2])),
                Layer::BatchNorm(b) => {
                    let (h, w) = if out.len() == 3 { (out[1], out[2]) } else { (1, 1) };
                    layers.push(LayerSpec::batch_norm(b.channels(), h, w));
                }
                Layer::Residual(r) => {
                    let (h, w) = (out[1], out[2]);
                    for conv in [r.first_conv(), r.second_conv()] {
                        layers.push(
                            LayerSpec {
                                kind: LayerKind::ConvBias,
                                ..LayerSpec::conv(conv.n_filters(), conv.in_channels(), conv.kernel(), 0)
                            }
                            .with_hw(h, w),
                        );
                        layers.push(LayerSpec::batch_norm(conv.n_filters(), h, w));
                    }
                }
                _ => {}
            }
        }
        Self { layers }
    }

    /// Copy with `removed[i]` filters taken out of layer `i`, propagated to
    /// the input channels of every layer linked through `input_from`.
    pub fn apply_removals(&self, removed: &[usize]) -> Result<Self> {
        if removed.len() > self.layers.len() {
            return Err(Error::IncompatibleDescriptors(format!(
                "{} removal counts for {} layers",
                removed.len(),
                self.layers.len()
            )));
        }
        let get = |i: usize| removed.get(i).copied().unwrap_or(0);
        let mut layers = self.layers.clone();
        for (i, l) in layers.iter_mut().enumerate() {
            if get(i) >= l.n_filters && get(i) > 0 {
                return Err(Error::InvalidSelection(format!("cannot remove all filters of layer {i}")));
            }
            l.n_filters -= get(i);
            if let Some(src) = l.input_from {
                l.in_channels -= get(src);
            }
        }
        Self::new(layers)
    }

    /// Filter counts of convolutional layers, in order.
    pub fn conv_filters(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter(|l| matches!(l.kind, LayerKind::Conv | LayerKind::ConvBias))
            .map(|l| l.n_filters)
            .collect()
    }
}

impl LayerSpec {
    fn with_hw(mut self, h: usize, w: usize) -> Self {
        self.out_h = Some(h);
        self.out_w = Some(w);
        self
    }
}

/// CIFAR-style ResNet of the given depth (`6n + 2`): a 16-filter stem, three
/// stages of `n` two-convolution blocks at 16/32/64 filters on 32/16/8 maps,
/// and a 10-way dense head. Shortcuts are parameter-free. `position` decides
/// whether block outputs are prunable, which sets the `input_from` links.
pub fn resnet_cifar(depth: usize, position: MaskPosition) -> Result<ArchDescriptor> {
    if depth < 8 || !(depth - 2).is_multiple_of(6) {
        return Err(Error::InvalidConfig(format!("ResNet depth {depth} is not 6n+2")));
    }
    let blocks = (depth - 2) / 6;
    let mut layers = vec![LayerSpec::conv(16, 3, 3, 32)];
    let mut in_ch = 16;
    for (stage, (ch, hw)) in [(16, 32), (32, 16), (64, 8)].into_iter().enumerate() {
        for b in 0..blocks {
            let first = layers.len();
            let mut conv1 = LayerSpec::conv(ch, in_ch, 3, hw);
            let block_input_prunable = (stage == 0 && b == 0) || position == MaskPosition::AfterShortcut;
            if block_input_prunable {
                conv1 = conv1.from(first - 1);
            }
            layers.push(conv1);
            layers.push(LayerSpec::conv(ch, ch, 3, hw).from(first));
            in_ch = ch;
        }
    }
    let mut fc = LayerSpec::dense(10, 64);
    if position == MaskPosition::AfterShortcut {
        fc = fc.from(layers.len() - 1);
    }
    layers.push(fc);
    ArchDescriptor::new(layers)
}

/// Resolves a preset name (see [`PRESETS`]) with the default gate position.
pub fn preset(name: &str) -> Result<ArchDescriptor> {
    preset_with_position(name, MaskPosition::BeforeShortcut)
}

pub fn preset_with_position(name: &str, position: MaskPosition) -> Result<ArchDescriptor> {
    let depth = match name {
        "resnet20-cifar" => 20,
        "resnet32-cifar" => 32,
        "resnet56-cifar" => 56,
        "resnet110-cifar" => 110,
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    resnet_cifar(depth, position)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counts {
    pub per_layer: Vec<u64>,
    pub total: u64,
}

pub fn count_params(desc: &ArchDescriptor) -> Counts {
    let per_layer: Vec<u64> = desc.layers.iter().map(LayerSpec::params).collect();
    Counts {
        total: per_layer.iter().sum(),
        per_layer,
    }
}

pub fn count_flops(desc: &ArchDescriptor) -> Result<Counts> {
    let per_layer = desc.layers.iter().map(LayerSpec::flops).collect::<Result<Vec<u64>>>()?;
    Ok(Counts {
        total: per_layer.iter().sum(),
        per_layer,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffRow {
    pub layer: usize,
    pub kind: LayerKind,
    pub filters_before: usize,
    pub filters_removed: i64,
    pub params_removed: i64,
    pub flops_removed: i64,
    pub params_removed_pct: f64,
    pub flops_removed_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsDiff {
    pub rows: Vec<DiffRow>,
    pub params_before: u64,
    pub flops_before: u64,
    pub params_removed: i64,
    pub flops_removed: i64,
    pub params_removed_pct: f64,
    pub flops_removed_pct: f64,
}

fn pct(removed: i64, before: u64) -> f64 {
    if before == 0 {
        0.0
    } else {
        100.0 * removed as f64 / before as f64
    }
}

/// Per-layer and total reductions from `before` to `after`. A layer's
/// reduction covers both its own removed filters and the input channels it
/// lost to pruning upstream.
pub fn diff_metrics(before: &ArchDescriptor, after: &ArchDescriptor) -> Result<MetricsDiff> {
    if before.layers.len() != after.layers.len() {
        return Err(Error::IncompatibleDescriptors(format!(
            "{} vs {} layers",
            before.layers.len(),
            after.layers.len()
        )));
    }
    let mut rows = Vec::with_capacity(before.layers.len());
    let (mut pb, mut fb, mut pr, mut fr) = (0u64, 0u64, 0i64, 0i64);
    for (i, (b, a)) in before.layers.iter().zip(&after.layers).enumerate() {
        if b.kind != a.kind || b.kernel != a.kernel {
            return Err(Error::IncompatibleDescriptors(format!("layer {i} differs in kind or kernel")));
        }
        let (bp, ap) = (b.params(), a.params());
        let (bf, af) = (b.flops()?, a.flops()?);
        let params_removed = bp as i64 - ap as i64;
        let flops_removed = bf as i64 - af as i64;
        pb += bp;
        fb += bf;
        pr += params_removed;
        fr += flops_removed;
        rows.push(DiffRow {
            layer: i,
            kind: b.kind,
            filters_before: b.n_filters,
            filters_removed: b.n_filters as i64 - a.n_filters as i64,
            params_removed,
            flops_removed,
            params_removed_pct: pct(params_removed, bp),
            flops_removed_pct: pct(flops_removed, bf),
        });
    }
    Ok(MetricsDiff {
        rows,
        params_before: pb,
        flops_before: fb,
        params_removed: pr,
        flops_removed: fr,
        params_removed_pct: pct(pr, pb),
        flops_removed_pct: pct(fr, fb),
    })
}

/// Millions, truncated (not rounded) to `decimals` places: 2 359 296 → "2.35M".
pub fn format_mega_truncated(value: u64, decimals: u32) -> String {
    let scale = 10u64.pow(decimals);
    let units = value * scale / 1_000_000;
    format!(
        "{}.{:0width$}M",
        units / scale,
        units % scale,
        width = decimals as usize
    )
}

/// Per-layer table as printed by the CLI.
pub fn render_table(desc: &ArchDescriptor) -> Result<String> {
    let params = count_params(desc);
    let flops = count_flops(desc)?;
    let mut s = String::from("layer,kind,filters,in_channels,kernel,out_h,out_w,params,flops\n");
    for (i, l) in desc.layers.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{},{},{}",
            l.kind.as_str(),
            l.n_filters,
            l.in_channels,
            l.kernel,
            l.out_h.unwrap_or(0),
            l.out_w.unwrap_or(0),
            params.per_layer[i],
            flops.per_layer[i]
        );
    }
    let filters: usize = desc.conv_filters().iter().sum();
    let _ = writeln!(
        s,
        "total,,{filters},,,,,{},{} ({})",
        params.total,
        flops.total,
        format_mega_truncated(flops.total, 1)
    );
    Ok(s)
}

pub fn render_diff(diff: &MetricsDiff) -> String {
    let mut s = String::from("layer,kind,filters,filters_removed,params_removed_pct,flops_removed_pct\n");
    for r in &diff.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.2},{:.2}",
            r.layer,
            r.kind.as_str(),
            r.filters_before,
            r.filters_removed,
            r.params_removed_pct,
            r.flops_removed_pct
        );
    }
    let removed: i64 = diff
        .rows
        .iter()
        .filter(|r| matches!(r.kind, LayerKind::Conv | LayerKind::ConvBias))
        .map(|r| r.filters_removed)
        .sum();
    let _ = writeln!(
        s,
        "total,,,{removed},{:.2},{:.2}",
        diff.params_removed_pct, diff.flops_removed_pct
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_filter_arithmetic() {
        let first = LayerSpec::conv(1, 16, 3, 32);
        let last = LayerSpec::conv(1, 64, 3, 8);
        assert_eq!(first.params(), 144);
        assert_eq!(last.params(), 576);
        assert_eq!(first.flops().unwrap(), 147_456);
        assert_eq!(last.flops().unwrap(), 36_864);
    }

    #[test]
    fn empty_descriptor_counts_zero() {
        let d = ArchDescriptor::default();
        assert_eq!(count_params(&d).total, 0);
        assert_eq!(count_flops(&d).unwrap().total, 0);
    }

    #[test]
    fn missing_spatial_size_is_an_error_for_flops_only() {
        let d = ArchDescriptor::parse("conv 4 2 3 - -\n").unwrap();
        assert_eq!(count_params(&d).total, 72);
        assert!(count_flops(&d).is_err());
    }

    #[test]
    fn parse_roundtrip_and_errors() {
        let d = preset("resnet20-cifar").unwrap();
        assert_eq!(ArchDescriptor::parse(&d.to_text()).unwrap(), d);
        assert!(ArchDescriptor::parse("conv 4 2 3 8\n").is_err());
        assert!(ArchDescriptor::parse("pool 4 2 3 8 8\n").is_err());
        assert!(ArchDescriptor::parse("conv 0 2 3 8 8\n").is_err());
        assert!(ArchDescriptor::parse("conv 4 2 3 8 8\nconv 4 3 3 8 8 from=0\n").is_err());
        assert!(matches!(preset("vgg16"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn truncated_mega_format() {
        assert_eq!(format_mega_truncated(442_368, 2), "0.44M");
        assert_eq!(format_mega_truncated(2_359_296, 2), "2.35M");
        assert_eq!(format_mega_truncated(1_179_648, 2), "1.17M");
        assert_eq!(format_mega_truncated(40_551_040, 1), "40.5M");
    }

    #[test]
    fn identical_descriptors_diff_to_zero() {
        let d = preset("resnet20-cifar").unwrap();
        let diff = diff_metrics(&d, &d).unwrap();
        assert!(diff.rows.iter().all(|r| r.params_removed_pct == 0.0 && r.flops_removed_pct == 0.0));
        assert_eq!(diff.params_removed_pct, 0.0);
    }

    #[test]
    fn flops_are_linear_in_filters() {
        for n in 1..10 {
            let l = LayerSpec::conv(n, 16, 3, 32);
            assert_eq!(l.flops().unwrap(), n as u64 * 147_456);
        }
    }
}
