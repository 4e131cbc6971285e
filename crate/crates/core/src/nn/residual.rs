use crate::rng::Rng;
use crate::tensor::Tensor;

use super::layers::{relu, relu_backward, BatchNorm, BnCache, Conv2d, Mask, Mode};

/// Where the second gate of a residual block sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskPosition {
    /// Gate the branch output before it is added to the shortcut. Pruning
    /// keeps the block's output channel count.
    #[default]
    BeforeShortcut,
    /// Gate the block output after the addition and final ReLU. Pruning
    /// removes channels from the shortcut path as well.
    AfterShortcut,
}

impl MaskPosition {
    pub fn as_str(&self) -> &'static str {
        match self {
            MaskPosition::BeforeShortcut => "before",
            MaskPosition::AfterShortcut => "after",
        }
    }
}

impl std::str::FromStr for MaskPosition {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "before" | "before-shortcut" | "bf" => Ok(Self::BeforeShortcut),
            "after" | "after-shortcut" | "af" => Ok(Self::AfterShortcut),
            other => Err(crate::Error::InvalidConfig(format!("unknown mask position `{other}`"))),
        }
    }
}

/// `conv → bn → relu → mask → conv → bn` branch plus identity shortcut and a
/// final ReLU.
///
/// The branch and the shortcut are summed through channel maps so that
/// pruning can drop branch filters or shortcut channels while the remaining
/// channels keep their place: `branch_map[f]` is the output channel fed by
/// the second convolution's filter `f`, `skip_map[c]` the output channel fed
/// by input channel `c` (or `None` once that channel is cut from the shortcut).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub(crate) conv1: Conv2d,
    pub(crate) bn1: BatchNorm,
    pub(crate) mask1: Mask,
    pub(crate) conv2: Conv2d,
    pub(crate) bn2: BatchNorm,
    pub(crate) mask2: Mask,
    pub(crate) position: MaskPosition,
    pub(crate) branch_map: Vec<usize>,
    pub(crate) skip_map: Vec<Option<usize>>,
    pub(crate) out_channels: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct ResidualCache {
    input: Tensor,
    bn1: BnCache,
    relu1: Tensor,
    masked1: Tensor,
    bn2: BnCache,
    out: Tensor,
}

impl ResidualBlock {
    /// Channel-preserving block with two 3×3 convolutions.
    pub fn new(channels: usize, position: MaskPosition, rng: &mut Rng) -> Self {
        Self {
            conv1: Conv2d::new(channels, channels, 3, 1, 1, rng),
            bn1: BatchNorm::new(channels),
            mask1: Mask::new(channels),
            conv2: Conv2d::new(channels, channels, 3, 1, 1, rng),
            bn2: BatchNorm::new(channels),
            mask2: Mask::new(channels),
            position,
            branch_map: (0..channels).collect(),
            skip_map: (0..channels).map(Some).collect(),
            out_channels: channels,
        }
    }

    pub fn position(&self) -> MaskPosition {
        self.position
    }

    pub fn in_channels(&self) -> usize {
        self.skip_map.len()
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn first_conv(&self) -> &Conv2d {
        &self.conv1
    }

    pub fn second_conv(&self) -> &Conv2d {
        &self.conv2
    }

    fn combine(&self, branch: &Tensor, input: &Tensor) -> Tensor {
        let (n, h, w) = (input.shape()[0], input.shape()[2], input.shape()[3]);
        let sp = h * w;
        let (cb, ci, co) = (self.branch_map.len(), self.skip_map.len(), self.out_channels);
        let mut out = vec![0.0; n * co * sp];
        for b in 0..n {
            for (f, &oc) in self.branch_map.iter().enumerate() {
                let src = &branch.data()[(b * cb + f) * sp..][..sp];
                for (d, s) in out[(b * co + oc) * sp..][..sp].iter_mut().zip(src) {
                    *d += s;
                }
            }
            for (c, oc) in self.skip_map.iter().enumerate() {
                if let Some(oc) = *oc {
                    let src = &input.data()[(b * ci + c) * sp..][..sp];
                    for (d, s) in out[(b * co + oc) * sp..][..sp].iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
        Tensor::from_parts(vec![n, co, h, w], out)
    }

    pub(crate) fn forward_eval(&self, x: &Tensor) -> Tensor {
        let mut h = relu(&self.bn1.forward_eval(&self.conv1.forward(x)));
        self.mask1.apply(&mut h);
        let mut h = self.bn2.forward_eval(&self.conv2.forward(&h));
        if self.position == MaskPosition::BeforeShortcut {
            self.mask2.apply(&mut h);
        }
        let mut out = relu(&self.combine(&h, x));
        if self.position == MaskPosition::AfterShortcut {
            self.mask2.apply(&mut out);
        }
        out
    }

    pub(crate) fn forward(&mut self, x: &Tensor, mode: Mode) -> (Tensor, Option<ResidualCache>) {
        if mode == Mode::Eval {
            return (self.forward_eval(x), None);
        }
        let (b1, bn1) = self.bn1.forward_train(&self.conv1.forward(x));
        let relu1 = relu(&b1);
        let mut masked1 = relu1.clone();
        self.mask1.apply(&mut masked1);
        let (mut b2, bn2) = self.bn2.forward_train(&self.conv2.forward(&masked1));
        if self.position == MaskPosition::BeforeShortcut {
            self.mask2.apply(&mut b2);
        }
        let out = relu(&self.combine(&b2, x));
        let mut gated = out.clone();
        if self.position == MaskPosition::AfterShortcut {
            self.mask2.apply(&mut gated);
        }
        let cache = ResidualCache {
            input: x.clone(),
            bn1,
            relu1,
            masked1,
            bn2,
            out,
        };
        (gated, Some(cache))
    }

    /// Returns the input gradient and parameter gradients in declaration
    /// order (conv1 w/b, bn1 γ/β, conv2 w/b, bn2 γ/β).
    pub(crate) fn backward(&self, cache: &ResidualCache, grad: &Tensor) -> (Tensor, Vec<Vec<f64>>) {
        let mut g = grad.clone();
        if self.position == MaskPosition::AfterShortcut {
            self.mask2.apply(&mut g);
        }
        let g_sum = relu_backward(&cache.out, &g);
        let x = &cache.input;
        let (n, h, w) = (x.shape()[0], x.shape()[2], x.shape()[3]);
        let sp = h * w;
        let (cb, ci, co) = (self.branch_map.len(), self.skip_map.len(), self.out_channels);

        let mut g_branch = vec![0.0; n * cb * sp];
        let mut g_skip = vec![0.0; n * ci * sp];
        for b in 0..n {
            for (f, &oc) in self.branch_map.iter().enumerate() {
                g_branch[(b * cb + f) * sp..][..sp]
                    .copy_from_slice(&g_sum.data()[(b * co + oc) * sp..][..sp]);
            }
            for (c, oc) in self.skip_map.iter().enumerate() {
                if let Some(oc) = *oc {
                    g_skip[(b * ci + c) * sp..][..sp]
                        .copy_from_slice(&g_sum.data()[(b * co + oc) * sp..][..sp]);
                }
            }
        }
        let mut g_branch = Tensor::from_parts(vec![n, cb, h, w], g_branch);
        if self.position == MaskPosition::BeforeShortcut {
            self.mask2.apply(&mut g_branch);
        }
        let (g, bn2_grads) = self.bn2.backward(&cache.bn2, &g_branch);
        let (mut g, conv2_grads) = self.conv2.backward(&cache.masked1, &g);
        self.mask1.apply(&mut g);
        let g = relu_backward(&cache.relu1, &g);
        let (g, bn1_grads) = self.bn1.backward(&cache.bn1, &g);
        let (g_in, conv1_grads) = self.conv1.backward(x, &g);

        let mut g_in = g_in;
        for (d, s) in g_in.data_mut().iter_mut().zip(&g_skip) {
            *d += s;
        }
        let grads = conv1_grads
            .into_iter()
            .chain(bn1_grads)
            .chain(conv2_grads)
            .chain(bn2_grads)
            .collect();
        (g_in, grads)
    }
}
