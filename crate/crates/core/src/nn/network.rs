use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::layers::{
    global_avg_pool, global_avg_pool_backward, relu, relu_backward, BatchNorm, BnCache, Conv2d,
    Dense, Mask, Mode,
};
use super::loss::{loss_sum, predict, LossKind};
use super::residual::{MaskPosition, ResidualBlock, ResidualCache};

/// Batches larger than this are evaluated in chunks.
const EVAL_CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Conv2d(Conv2d),
    BatchNorm(BatchNorm),
    Relu,
    Mask(Mask),
    Flatten,
    GlobalAvgPool,
    Residual(Box<ResidualBlock>),
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Conv2d(_) => "conv2d",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Relu => "relu",
            Layer::Mask(_) => "mask",
            Layer::Flatten => "flatten",
            Layer::GlobalAvgPool => "gap",
            Layer::Residual(_) => "residual",
        }
    }

    fn is_producer(&self) -> bool {
        matches!(self, Layer::Dense(_) | Layer::Conv2d(_))
    }

    /// Per-sample output shape for a per-sample input shape.
    fn output_shape(&self, input: &[usize]) -> Option<Vec<usize>> {
        match self {
            Layer::Dense(d) => (input.iter().product::<usize>() == d.in_units && input.len() == 1)
                .then(|| vec![d.out_units]),
            Layer::Conv2d(c) => {
                if input.len() != 3 || input[0] != c.in_channels {
                    return None;
                }
                let (h, w) = c.output_hw(input[1], input[2])?;
                Some(vec![c.n_filters, h, w])
            }
            Layer::BatchNorm(b) => (input[0] == b.channels()).then(|| input.to_vec()),
            Layer::Mask(m) => (input[0] == m.width()).then(|| input.to_vec()),
            Layer::Relu => Some(input.to_vec()),
            Layer::Flatten => Some(vec![input.iter().product()]),
            Layer::GlobalAvgPool => (input.len() == 3).then(|| vec![input[0]]),
            Layer::Residual(r) => (input.len() == 3 && input[0] == r.in_channels())
                .then(|| vec![r.out_channels, input[1], input[2]]),
        }
    }
}

enum Cache {
    Input(Tensor),
    Bn(BnCache),
    Output(Tensor),
    Shape(Vec<usize>),
    Residual(Box<ResidualCache>),
    Nothing,
}

/// Location of a prunable layer: the layer whose filters/units are gated by a
/// mask, and the mask itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Site {
    /// Top-level `producer → [bn] → [relu] → mask` chain.
    Top { producer: usize, mask: usize },
    /// First convolution of the residual block at this layer index.
    BlockFirst(usize),
    /// Second gate of the residual block at this layer index.
    BlockSecond(usize),
}

/// Summary of one prunable layer as seen from outside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrunableLayer {
    pub index: usize,
    pub width: usize,
    pub description: String,
}

/// Parameter gradients, aligned with [`Network::params`], and the batch loss
/// they were computed at.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub tensors: Vec<Vec<f64>>,
}

/// Ordered stack of layers with a fixed per-sample input shape and a loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub(crate) input_shape: Vec<usize>,
    pub(crate) layers: Vec<Layer>,
    pub(crate) loss: LossKind,
}

impl Network {
    /// Assembles and validates a network from explicit layers.
    pub fn from_layers(input_shape: Vec<usize>, layers: Vec<Layer>, loss: LossKind) -> Result<Self> {
        let net = Self {
            input_shape,
            layers,
            loss,
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        let shapes = self.layer_shapes()?;
        let out = shapes.last().unwrap();
        match self.loss {
            LossKind::BinaryCrossEntropy if out != &[1] => {
                return Err(Error::InvalidConfig("binary cross-entropy needs one output".into()))
            }
            LossKind::CrossEntropy if out.len() != 1 || out[0] < 2 => {
                return Err(Error::InvalidConfig("cross-entropy needs ≥2 outputs".into()))
            }
            _ => {}
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if let Layer::Mask(_) = layer {
                if !self.layers[..i].iter().any(Layer::is_producer) {
                    return Err(Error::InvalidConfig(format!("mask at layer {i} has no producer")));
                }
                if self.consumer_after(i).is_none() {
                    return Err(Error::InvalidConfig(format!("mask at layer {i} has no consumer")));
                }
            }
            if let Layer::Residual(r) = layer {
                if r.conv1.kernel % 2 == 0 || r.conv1.padding != r.conv1.kernel / 2 {
                    return Err(Error::InvalidConfig("residual convs must preserve shape".into()));
                }
            }
        }
        Ok(())
    }

    /// Per-sample shapes: entry 0 is the input, entry `i + 1` the output of
    /// layer `i`.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shapes = vec![self.input_shape.clone()];
        for (i, layer) in self.layers.iter().enumerate() {
            let cur = shapes.last().unwrap();
            let next = layer.output_shape(cur).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "layer {i} ({}) cannot take input of shape {cur:?}",
                    layer.kind()
                ))
            })?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> Vec<usize> {
        self.layer_shapes().expect("validated").pop().unwrap()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss
    }

    /// Index of the first layer after `i` that consumes channels structurally.
    pub(crate) fn consumer_after(&self, i: usize) -> Option<usize> {
        self.layers[i + 1..]
            .iter()
            .position(|l| matches!(l, Layer::Dense(_) | Layer::Conv2d(_) | Layer::Residual(_)))
            .map(|p| p + i + 1)
    }

    pub(crate) fn sites(&self) -> Vec<Site> {
        let mut sites = Vec::new();
        let mut producer = None;
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Dense(_) | Layer::Conv2d(_) => producer = Some(i),
                Layer::Mask(_) => sites.push(Site::Top {
                    producer: producer.expect("validated"),
                    mask: i,
                }),
                Layer::Residual(_) => {
                    producer = None;
                    sites.push(Site::BlockFirst(i));
                    sites.push(Site::BlockSecond(i));
                }
                _ => {}
            }
        }
        sites
    }

    pub(crate) fn site(&self, layer: usize) -> Result<Site> {
        self.sites().get(layer).copied().ok_or(Error::NoSuchLayer(layer))
    }

    fn site_mask(&self, site: Site) -> &Mask {
        match site {
            Site::Top { mask, .. } => match &self.layers[mask] {
                Layer::Mask(m) => m,
                _ => unreachable!(),
            },
            Site::BlockFirst(b) | Site::BlockSecond(b) => match &self.layers[b] {
                Layer::Residual(r) if matches!(site, Site::BlockFirst(_)) => &r.mask1,
                Layer::Residual(r) => &r.mask2,
                _ => unreachable!(),
            },
        }
    }

    fn site_mask_mut(&mut self, site: Site) -> &mut Mask {
        match site {
            Site::Top { mask, .. } => match &mut self.layers[mask] {
                Layer::Mask(m) => m,
                _ => unreachable!(),
            },
            Site::BlockFirst(b) => match &mut self.layers[b] {
                Layer::Residual(r) => &mut r.mask1,
                _ => unreachable!(),
            },
            Site::BlockSecond(b) => match &mut self.layers[b] {
                Layer::Residual(r) => &mut r.mask2,
                _ => unreachable!(),
            },
        }
    }

    /// Number of prunable layers (one per mask).
    pub fn num_prunable(&self) -> usize {
        self.sites().len()
    }

    pub fn prunable_layers(&self) -> Vec<PrunableLayer> {
        self.sites()
            .into_iter()
            .enumerate()
            .map(|(index, site)| {
                let description = match site {
                    Site::Top { producer, .. } => {
                        format!("{}@{}", self.layers[producer].kind(), producer)
                    }
                    Site::BlockFirst(b) => format!("residual@{b}.conv1"),
                    Site::BlockSecond(b) => match &self.layers[b] {
                        Layer::Residual(r) if r.position == MaskPosition::AfterShortcut => {
                            format!("residual@{b}.out")
                        }
                        _ => format!("residual@{b}.conv2"),
                    },
                };
                PrunableLayer {
                    index,
                    width: self.site_mask(site).width(),
                    description,
                }
            })
            .collect()
    }

    /// Number of filters/units currently gated by prunable layer `layer`.
    pub fn layer_width(&self, layer: usize) -> Result<usize> {
        Ok(self.site_mask(self.site(layer)?).width())
    }

    pub fn layer_mask(&self, layer: usize) -> Result<&[bool]> {
        Ok(self.site_mask(self.site(layer)?).entries())
    }

    /// Gates the filters of prunable layer `layer`: `false` turns a filter off
    /// for every subsequent forward pass until [`Network::clear_masks`].
    pub fn set_layer_mask(&mut self, layer: usize, mask: &[bool]) -> Result<()> {
        let site = self.site(layer)?;
        self.site_mask_mut(site).set(mask)
    }

    pub fn clear_masks(&mut self) {
        for site in self.sites() {
            self.site_mask_mut(site).clear();
        }
    }

    /// Sets the parameters that produce filter `filter` of prunable layer
    /// `layer` to zero, including the following batch-norm affine terms.
    /// Not defined for gates placed after a shortcut addition.
    pub fn zero_filter(&mut self, layer: usize, filter: usize) -> Result<()> {
        let site = self.site(layer)?;
        let width = self.site_mask(site).width();
        if filter >= width {
            return Err(Error::InvalidSelection(format!("filter {filter} ≥ width {width}")));
        }
        let zero_bn = |bn: &mut BatchNorm| {
            bn.gamma[filter] = 0.0;
            bn.beta[filter] = 0.0;
        };
        match site {
            Site::Top { producer, mask } => {
                for l in &mut self.layers[producer..mask] {
                    match l {
                        Layer::Dense(d) => d.zero_output(filter),
                        Layer::Conv2d(c) => c.zero_filter(filter),
                        Layer::BatchNorm(bn) => zero_bn(bn),
                        _ => {}
                    }
                }
            }
            Site::BlockFirst(b) | Site::BlockSecond(b) => {
                let Layer::Residual(r) = &mut self.layers[b] else { unreachable!() };
                if matches!(site, Site::BlockFirst(_)) {
                    r.conv1.zero_filter(filter);
                    zero_bn(&mut r.bn1);
                } else if r.position == MaskPosition::BeforeShortcut {
                    r.conv2.zero_filter(filter);
                    zero_bn(&mut r.bn2);
                } else {
                    return Err(Error::InvalidSelection(
                        "gate after the shortcut has no equivalent parameter zeroing".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Trainable parameter tensors in declaration order.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => out.extend([&d.weights[..], &d.bias[..]]),
                Layer::Conv2d(c) => out.extend([&c.filters[..], &c.bias[..]]),
                Layer::BatchNorm(b) => out.extend([&b.gamma[..], &b.beta[..]]),
                Layer::Residual(r) => out.extend([
                    &r.conv1.filters[..],
                    &r.conv1.bias[..],
                    &r.bn1.gamma[..],
                    &r.bn1.beta[..],
                    &r.conv2.filters[..],
                    &r.conv2.bias[..],
                    &r.bn2.gamma[..],
                    &r.bn2.beta[..],
                ]),
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(d) => out.extend([&mut d.weights[..], &mut d.bias[..]]),
                Layer::Conv2d(c) => out.extend([&mut c.filters[..], &mut c.bias[..]]),
                Layer::BatchNorm(b) => out.extend([&mut b.gamma[..], &mut b.beta[..]]),
                Layer::Residual(r) => {
                    let r = &mut **r;
                    out.extend([
                        &mut r.conv1.filters[..],
                        &mut r.conv1.bias[..],
                        &mut r.bn1.gamma[..],
                        &mut r.bn1.beta[..],
                        &mut r.conv2.filters[..],
                        &mut r.conv2.bias[..],
                        &mut r.bn2.gamma[..],
                        &mut r.bn2.beta[..],
                    ])
                }
                _ => {}
            }
        }
        out
    }

    /// Total number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        if batch.shape().len() != self.input_shape.len() + 1 || batch.shape()[1..] != self.input_shape[..] {
            let mut expected = vec![batch.shape().first().copied().unwrap_or(0)];
            expected.extend(&self.input_shape);
            return Err(Error::ShapeMismatch {
                expected,
                got: batch.shape().to_vec(),
            });
        }
        Ok(())
    }

    fn run_eval(&self, batch: &Tensor) -> Result<Tensor> {
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            x = match layer {
                Layer::Dense(d) => d.forward(&x),
                Layer::Conv2d(c) => c.forward(&x),
                Layer::BatchNorm(b) => b.forward_eval(&x),
                Layer::Relu => relu(&x),
                Layer::Mask(m) => {
                    m.apply(&mut x);
                    x
                }
                Layer::Flatten => {
                    let n = x.batch();
                    let len = x.sample_len();
                    x.reshape(vec![n, len])?
                }
                Layer::GlobalAvgPool => global_avg_pool(&x),
                Layer::Residual(r) => r.forward_eval(&x),
            };
            if !x.all_finite() {
                return Err(Error::NonFinite { layer: i });
            }
        }
        Ok(x)
    }

    /// Inference-mode forward pass (batch norm uses running statistics).
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_batch(batch)?;
        if batch.batch() <= EVAL_CHUNK {
            return self.run_eval(batch);
        }
        let mut parts = Vec::new();
        let idx: Vec<usize> = (0..batch.batch()).collect();
        for chunk in idx.chunks(EVAL_CHUNK) {
            parts.extend(self.run_eval(&batch.select(chunk))?.into_data());
        }
        let mut shape = vec![batch.batch()];
        shape.extend(self.output_shape());
        Tensor::new(shape, parts)
    }

    fn run_train(&mut self, batch: &Tensor) -> Result<(Tensor, Vec<Cache>)> {
        self.check_batch(batch)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let (y, cache) = match layer {
                Layer::Dense(d) => (d.forward(&x), Cache::Input(x)),
                Layer::Conv2d(c) => (c.forward(&x), Cache::Input(x)),
                Layer::BatchNorm(b) => {
                    let (y, c) = b.forward_train(&x);
                    (y, Cache::Bn(c))
                }
                Layer::Relu => {
                    let y = relu(&x);
                    (y.clone(), Cache::Output(y))
                }
                Layer::Mask(m) => {
                    m.apply(&mut x);
                    (x, Cache::Nothing)
                }
                Layer::Flatten => {
                    let shape = x.shape().to_vec();
                    let n = x.batch();
                    let len = x.sample_len();
                    (x.reshape(vec![n, len])?, Cache::Shape(shape))
                }
                Layer::GlobalAvgPool => (global_avg_pool(&x), Cache::Shape(x.shape().to_vec())),
                Layer::Residual(r) => {
                    let (y, c) = r.forward(&x, Mode::Train);
                    (y, Cache::Residual(Box::new(c.expect("train mode caches"))))
                }
            };
            if !y.all_finite() {
                return Err(Error::NonFinite { layer: i });
            }
            caches.push(cache);
            x = y;
        }
        Ok((x, caches))
    }

    /// Forward pass in the given mode. Training mode normalizes with batch
    /// statistics and updates the running averages.
    pub fn forward_with_mode(&mut self, batch: &Tensor, mode: Mode) -> Result<Tensor> {
        match mode {
            Mode::Eval => self.forward(batch),
            Mode::Train => Ok(self.run_train(batch)?.0),
        }
    }

    /// Mean loss of a labelled batch in the given mode.
    pub fn batch_loss(&mut self, batch: &Tensor, labels: &[usize], mode: Mode) -> Result<f64> {
        let out = self.forward_with_mode(batch, mode)?;
        Ok(loss_sum(self.loss, &out, labels, None).0 / labels.len() as f64)
    }

    /// Gradient of the mean batch loss with respect to every trainable
    /// parameter, computed in training mode.
    pub fn gradients(&mut self, batch: &Tensor, labels: &[usize]) -> Result<Gradients> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let (out, caches) = self.run_train(batch)?;
        let (loss_total, grad) = loss_sum(self.loss, &out, labels, Some(1.0 / labels.len() as f64));
        let mut g = grad.expect("gradient requested");
        let mut per_layer: Vec<Vec<Vec<f64>>> = vec![Vec::new(); self.layers.len()];
        for (i, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            g = match (layer, cache) {
                (Layer::Dense(d), Cache::Input(x)) => {
                    let (gx, p) = d.backward(&x, &g);
                    per_layer[i] = p;
                    gx
                }
                (Layer::Conv2d(c), Cache::Input(x)) => {
                    let (gx, p) = c.backward(&x, &g);
                    per_layer[i] = p;
                    gx
                }
                (Layer::BatchNorm(b), Cache::Bn(c)) => {
                    let (gx, p) = b.backward(&c, &g);
                    per_layer[i] = p;
                    gx
                }
                (Layer::Relu, Cache::Output(y)) => relu_backward(&y, &g),
                (Layer::Mask(m), Cache::Nothing) => {
                    m.apply(&mut g);
                    g
                }
                (Layer::Flatten, Cache::Shape(s)) => g.reshape(s)?,
                (Layer::GlobalAvgPool, Cache::Shape(s)) => global_avg_pool_backward(&s, &g),
                (Layer::Residual(r), Cache::Residual(c)) => {
                    let (gx, p) = r.backward(&c, &g);
                    per_layer[i] = p;
                    gx
                }
                _ => unreachable!("cache kind matches layer kind"),
            };
            if !g.all_finite() {
                return Err(Error::NonFinite { layer: i });
            }
        }
        Ok(Gradients {
            loss: loss_total / labels.len() as f64,
            tensors: per_layer.into_iter().flatten().collect(),
        })
    }

    /// Mean loss over a dataset in inference mode.
    pub fn loss(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let out = self.forward(data.inputs())?;
        Ok(loss_sum(self.loss, &out, data.labels(), None).0 / data.len() as f64)
    }

    pub fn predict(&self, batch: &Tensor) -> Result<Vec<usize>> {
        Ok(predict(self.loss, &self.forward(batch)?))
    }

    /// Fraction of samples whose predicted class matches the label.
    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let pred = self.predict(data.inputs())?;
        let hits = pred.iter().zip(data.labels()).filter(|(p, y)| p == y).count();
        Ok(hits as f64 / data.len() as f64)
    }
}

/// Incremental network construction with shape tracking.
///
/// ```
/// use ensemble_prune::nn::{LossKind, NetworkBuilder};
/// use ensemble_prune::rng::SeedStream;
///
/// let mut rng = SeedStream::new(1).rng();
/// let net = NetworkBuilder::new(vec![2], LossKind::BinaryCrossEntropy)
///     .dense(10, &mut rng)
///     .relu()
///     .mask()
///     .dense(1, &mut rng)
///     .build()
///     .unwrap();
/// assert_eq!(net.num_prunable(), 1);
/// ```
pub struct NetworkBuilder {
    input_shape: Vec<usize>,
    shape: Vec<usize>,
    layers: Vec<Layer>,
    loss: LossKind,
    error: Option<Error>,
}

impl NetworkBuilder {
    pub fn new(input_shape: Vec<usize>, loss: LossKind) -> Self {
        Self {
            shape: input_shape.clone(),
            input_shape,
            layers: Vec::new(),
            loss,
            error: None,
        }
    }

    fn push(mut self, layer: Layer) -> Self {
        if self.error.is_some() {
            return self;
        }
        match layer.output_shape(&self.shape) {
            Some(s) => {
                self.shape = s;
                self.layers.push(layer);
            }
            None => {
                self.error = Some(Error::InvalidConfig(format!(
                    "{} layer cannot take input of shape {:?}",
                    layer.kind(),
                    self.shape
                )))
            }
        }
        self
    }

    fn channels(&self) -> usize {
        self.shape[0]
    }

    pub fn dense(self, out_units: usize, rng: &mut Rng) -> Self {
        let in_units = self.shape.iter().product();
        self.push(Layer::Dense(Dense::new(in_units, out_units, rng)))
    }

    pub fn conv(self, n_filters: usize, kernel: usize, stride: usize, padding: usize, rng: &mut Rng) -> Self {
        let c = self.channels();
        self.push(Layer::Conv2d(Conv2d::new(c, n_filters, kernel, stride, padding, rng)))
    }

    pub fn batch_norm(self) -> Self {
        let c = self.channels();
        self.push(Layer::BatchNorm(BatchNorm::new(c)))
    }

    pub fn relu(self) -> Self {
        self.push(Layer::Relu)
    }

    pub fn mask(self) -> Self {
        let c = self.channels();
        self.push(Layer::Mask(Mask::new(c)))
    }

    pub fn flatten(self) -> Self {
        self.push(Layer::Flatten)
    }

    pub fn global_avg_pool(self) -> Self {
        self.push(Layer::GlobalAvgPool)
    }

    pub fn residual(self, position: MaskPosition, rng: &mut Rng) -> Self {
        let c = self.channels();
        self.push(Layer::Residual(Box::new(ResidualBlock::new(c, position, rng))))
    }

    pub fn layer(self, layer: Layer) -> Self {
        self.push(layer)
    }

    pub fn build(self) -> Result<Network> {
        if let Some(e) = self.error {
            return Err(e);
        }
        Network::from_layers(self.input_shape, self.layers, self.loss)
    }
}
