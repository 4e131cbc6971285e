//! Portable checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes   "ENSPRUNE"
//! version      u32       1
//! header_len   u32       length of the UTF-8 header in bytes
//! header       text      one record per line (see below)
//! value_count  u64       number of f64 values that follow
//! values       f64 × n   little-endian IEEE-754, in declaration order
//! ```
//!
//! Header lines:
//!
//! ```text
//! input <d0> <d1> ...
//! loss ce|bce
//! dense <in> <out>
//! conv2d <in_channels> <filters> <kernel> <stride> <padding>
//! batchnorm <channels>
//! relu | flatten | gap
//! mask <width>
//! residual <in> <mid> <branch> <out> <kernel> before|after
//! branch <out-index> ...
//! skip <out-index|-> ...
//! ```
//!
//! Values per layer: dense weights, bias; conv filters, bias; batch norm
//! γ, β, running mean, running variance; mask entries as 0.0/1.0; residual
//! blocks serialize conv1, bn1, mask1, conv2, bn2, mask2 in that order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::layers::{BatchNorm, Conv2d, Dense, Mask};
use super::loss::LossKind;
use super::network::{Layer, Network};
use super::residual::{MaskPosition, ResidualBlock};

pub const MAGIC: &[u8; 8] = b"ENSPRUNE";
pub const VERSION: u32 = 1;

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn push_conv(values: &mut Vec<f64>, c: &Conv2d) {
    values.extend(&c.filters);
    values.extend(&c.bias);
}

fn push_bn(values: &mut Vec<f64>, b: &BatchNorm) {
    for v in [&b.gamma, &b.beta, &b.running_mean, &b.running_var] {
        values.extend(v);
    }
}

fn push_mask(values: &mut Vec<f64>, m: &Mask) {
    values.extend(m.keep.iter().map(|&k| if k { 1.0 } else { 0.0 }));
}

pub fn to_bytes(net: &Network) -> Vec<u8> {
    let mut header = format!("input {}\nloss {}\n", join(&net.input_shape), net.loss.as_str());
    let mut values = Vec::new();
    for layer in &net.layers {
        match layer {
            Layer::Dense(d) => {
                header += &format!("dense {} {}\n", d.in_units, d.out_units);
                values.extend(&d.weights);
                values.extend(&d.bias);
            }
            Layer::Conv2d(c) => {
                header += &format!(
                    "conv2d {} {} {} {} {}\n",
                    c.in_channels, c.n_filters, c.kernel, c.stride, c.padding
                );
                push_conv(&mut values, c);
            }
            Layer::BatchNorm(b) => {
                header += &format!("batchnorm {}\n", b.channels());
                push_bn(&mut values, b);
            }
            Layer::Relu => header += "relu\n",
            Layer::Flatten => header += "flatten\n",
            Layer::GlobalAvgPool => header += "gap\n",
            Layer::Mask(m) => {
                header += &format!("mask {}\n", m.width());
                push_mask(&mut values, m);
            }
            Layer::Residual(r) => {
                header += &format!(
                    "residual {} {} {} {} {} {}\n",
                    r.in_channels(),
                    r.conv1.n_filters,
                    r.conv2.n_filters,
                    r.out_channels,
                    r.conv1.kernel,
                    r.position.as_str()
                );
                header += &format!("branch {}\n", join(&r.branch_map));
                let skip: Vec<String> = r
                    .skip_map
                    .iter()
                    .map(|s| s.map_or("-".to_string(), |v| v.to_string()))
                    .collect();
                header += &format!("skip {}\n", skip.join(" "));
                push_conv(&mut values, &r.conv1);
                push_bn(&mut values, &r.bn1);
                push_mask(&mut values, &r.mask1);
                push_conv(&mut values, &r.conv2);
                push_bn(&mut values, &r.bn2);
                push_mask(&mut values, &r.mask2);
            }
        }
    }
    let mut out = Vec::with_capacity(24 + header.len() + 8 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

struct Values<'a> {
    values: &'a [f64],
    pos: usize,
}

impl Values<'_> {
    fn take(&mut self, n: usize) -> Result<Vec<f64>> {
        let end = self.pos + n;
        let slice = self
            .values
            .get(self.pos..end)
            .ok_or_else(|| bad("value section shorter than header declares"))?;
        self.pos = end;
        Ok(slice.to_vec())
    }

    fn conv(&mut self, in_channels: usize, n_filters: usize, kernel: usize, stride: usize, padding: usize) -> Result<Conv2d> {
        Ok(Conv2d {
            in_channels,
            n_filters,
            kernel,
            stride,
            padding,
            filters: self.take(n_filters * in_channels * kernel * kernel)?,
            bias: self.take(n_filters)?,
        })
    }

    fn bn(&mut self, c: usize) -> Result<BatchNorm> {
        Ok(BatchNorm {
            gamma: self.take(c)?,
            beta: self.take(c)?,
            running_mean: self.take(c)?,
            running_var: self.take(c)?,
        })
    }

    fn mask(&mut self, c: usize) -> Result<Mask> {
        let raw = self.take(c)?;
        let keep = raw
            .iter()
            .map(|&v| match v {
                1.0 => Ok(true),
                0.0 => Ok(false),
                _ => Err(bad("mask entries must be 0 or 1")),
            })
            .collect::<Result<_>>()?;
        Ok(Mask { keep })
    }
}

fn nums(fields: &[&str], n: usize) -> Result<Vec<usize>> {
    if fields.len() < n {
        return Err(bad(format!("expected {n} fields in `{}`", fields.join(" "))));
    }
    fields[..n]
        .iter()
        .map(|f| f.parse().map_err(|_| bad(format!("bad integer `{f}`"))))
        .collect()
}

pub fn from_bytes(bytes: &[u8]) -> Result<Network> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let header_end = 16 + header_len;
    let header = bytes
        .get(16..header_end)
        .and_then(|h| std::str::from_utf8(h).ok())
        .ok_or_else(|| bad("truncated or non-UTF-8 header"))?;
    let count_bytes = bytes
        .get(header_end..header_end + 8)
        .ok_or_else(|| bad("missing value count"))?;
    let count = u64::from_le_bytes(count_bytes.try_into().unwrap()) as usize;
    let body = &bytes[header_end + 8..];
    if body.len() != count * 8 {
        return Err(bad(format!("expected {count} values, found {} bytes", body.len())));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut vals = Values {
        values: &values,
        pos: 0,
    };

    let mut lines = header.lines();
    let mut input_shape = None;
    let mut loss = None;
    let mut layers = Vec::new();
    while let Some(line) = lines.next() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let Some((&kind, rest)) = fields.split_first() else { continue };
        match kind {
            "input" => input_shape = Some(nums(rest, rest.len())?),
            "loss" => {
                loss = Some(match rest.first() {
                    Some(&"ce") => LossKind::CrossEntropy,
                    Some(&"bce") => LossKind::BinaryCrossEntropy,
                    _ => return Err(bad(format!("unknown loss in `{line}`"))),
                })
            }
            "dense" => {
                let n = nums(rest, 2)?;
                let w = vals.take(n[0] * n[1])?;
                let b = vals.take(n[1])?;
                layers.push(Layer::Dense(Dense::from_parts(n[0], n[1], w, b)?));
            }
            "conv2d" => {
                let n = nums(rest, 5)?;
                layers.push(Layer::Conv2d(vals.conv(n[0], n[1], n[2], n[3], n[4])?));
            }
            "batchnorm" => layers.push(Layer::BatchNorm(vals.bn(nums(rest, 1)?[0])?)),
            "mask" => layers.push(Layer::Mask(vals.mask(nums(rest, 1)?[0])?)),
            "relu" => layers.push(Layer::Relu),
            "flatten" => layers.push(Layer::Flatten),
            "gap" => layers.push(Layer::GlobalAvgPool),
            "residual" => {
                let n = nums(rest, 5)?;
                let (cin, mid, branch, out, k) = (n[0], n[1], n[2], n[3], n[4]);
                let position: MaskPosition = rest
                    .get(5)
                    .ok_or_else(|| bad("residual line lacks mask position"))?
                    .parse()?;
                let branch_line = lines.next().ok_or_else(|| bad("missing branch map"))?;
                let skip_line = lines.next().ok_or_else(|| bad("missing skip map"))?;
                let bf: Vec<&str> = branch_line.split_whitespace().collect();
                let sf: Vec<&str> = skip_line.split_whitespace().collect();
                if bf.first() != Some(&"branch") || sf.first() != Some(&"skip") {
                    return Err(bad("residual maps out of order"));
                }
                let branch_map = nums(&bf[1..], bf.len() - 1)?;
                let skip_map = sf[1..]
                    .iter()
                    .map(|s| match *s {
                        "-" => Ok(None),
                        v => v.parse().map(Some).map_err(|_| bad(format!("bad skip entry `{v}`"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                if branch_map.len() != branch
                    || skip_map.len() != cin
                    || branch_map.iter().chain(skip_map.iter().flatten()).any(|&o| o >= out)
                {
                    return Err(bad("residual channel maps inconsistent with sizes"));
                }
                let conv1 = vals.conv(cin, mid, k, 1, k / 2)?;
                let bn1 = vals.bn(mid)?;
                let mask1 = vals.mask(mid)?;
                let conv2 = vals.conv(mid, branch, k, 1, k / 2)?;
                let bn2 = vals.bn(branch)?;
                let mask_width = match position {
                    MaskPosition::BeforeShortcut => branch,
                    MaskPosition::AfterShortcut => out,
                };
                let mask2 = vals.mask(mask_width)?;
                layers.push(Layer::Residual(Box::new(ResidualBlock {
                    conv1,
                    bn1,
                    mask1,
                    conv2,
                    bn2,
                    mask2,
                    position,
                    branch_map,
                    skip_map,
                    out_channels: out,
                })));
            }
            other => return Err(bad(format!("unknown record `{other}`"))),
        }
    }
    if vals.pos != values.len() {
        return Err(bad("value section longer than header declares"));
    }
    let input_shape = input_shape.ok_or_else(|| bad("missing input record"))?;
    let loss = loss.ok_or_else(|| bad("missing loss record"))?;
    Network::from_layers(input_shape, layers, loss)
}

pub fn save(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(net))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Network> {
    from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetworkBuilder;
    use crate::rng::SeedStream;

    #[test]
    fn rejects_corruption() {
        let mut rng = SeedStream::new(5).rng();
        let net = NetworkBuilder::new(vec![2], LossKind::BinaryCrossEntropy)
            .dense(3, &mut rng)
            .relu()
            .mask()
            .dense(1, &mut rng)
            .build()
            .unwrap();
        let bytes = to_bytes(&net);
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(from_bytes(&wrong).is_err());
        assert_eq!(from_bytes(&bytes).unwrap(), net);
    }
}
