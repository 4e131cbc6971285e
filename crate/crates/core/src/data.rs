//! Datasets: the labelled container consumed by the engine, the rotated XOR
//! problem with its hand-built three-neuron solution, and small synthetic
//! image sets for exercising convolutional pruning.

use std::f64::consts::PI;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::{Dense, Layer, LossKind, Mask, Network};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Inputs with one class label per batch entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Tensor,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if inputs.batch() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} inputs but {} labels",
                inputs.batch(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::DimensionMismatch(format!("label {bad} ≥ {classes} classes")));
        }
        Ok(Self {
            inputs,
            labels,
            classes,
        })
    }

    pub fn inputs(&self) -> &Tensor {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        (
            self.inputs.select(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let (inputs, labels) = self.batch(indices);
        Dataset {
            inputs,
            labels,
            classes: self.classes,
        }
    }

    /// Shuffles, then splits into `(first, rest)` with `round(fraction·len)`
    /// samples in the first part.
    pub fn split(&self, fraction: f64, rng: &mut Rng) -> (Dataset, Dataset) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(rng);
        let cut = ((fraction * self.len() as f64).round() as usize).clamp(0, self.len());
        let (a, b) = idx.split_at(cut);
        (self.subset(a), self.subset(b))
    }

    /// Fixed random subset of at most `max` samples (the whole set, in
    /// original order, when it is already small enough).
    pub fn sample(&self, max: usize, rng: &mut Rng) -> Dataset {
        if self.len() <= max {
            return self.clone();
        }
        let mut idx = rand::seq::index::sample(rng, self.len(), max).into_vec();
        idx.sort_unstable();
        self.subset(&idx)
    }
}

/// Random orthonormal pair `(a, b)` in the plane.
pub fn gen_orthonormal_pair(rng: &mut Rng) -> ([f64; 2], [f64; 2]) {
    let theta = rng.random_range(0.0..2.0 * PI);
    let a = [theta.cos(), theta.sin()];
    let b = if rng.random::<bool>() {
        [-a[1], a[0]]
    } else {
        [a[1], -a[0]]
    };
    (a, b)
}

fn dot(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

fn check_orthonormal(a: [f64; 2], b: [f64; 2]) -> Result<()> {
    let tol = 1e-12;
    if (dot(a, a) - 1.0).abs() > tol || (dot(b, b) - 1.0).abs() > tol || dot(a, b).abs() > tol {
        return Err(Error::NotOrthonormal);
    }
    Ok(())
}

/// Rotated XOR problem: standard Gaussian inputs labelled by the sign of
/// `(a·x)(b·x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct XorDataset {
    pub samples: Vec<[f64; 2]>,
    pub labels: Vec<i8>,
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl XorDataset {
    pub fn label_of(a: [f64; 2], b: [f64; 2], x: [f64; 2]) -> i8 {
        let p = dot(a, x) * dot(b, x);
        if p > 0.0 {
            1
        } else if p < 0.0 {
            -1
        } else {
            0
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Engine view: `[N, 2]` inputs, class 1 for label +1 and class 0 for −1.
    pub fn to_dataset(&self) -> Dataset {
        let data = self.samples.iter().flat_map(|s| s.iter().copied()).collect();
        let inputs = Tensor::new(vec![self.len(), 2], data).expect("non-empty dataset");
        let labels = self.labels.iter().map(|&l| usize::from(l > 0)).collect();
        Dataset::new(inputs, labels, 2).expect("binary labels")
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "x1,x2,label")?;
        for (s, l) in self.samples.iter().zip(&self.labels) {
            writeln!(w, "{},{},{}", s[0], s[1], l)?;
        }
        Ok(())
    }
}

/// XOR dataset of `n` samples with a freshly drawn basis.
pub fn gen_xor_dataset(n: usize, rng: &mut Rng) -> Result<XorDataset> {
    let (a, b) = gen_orthonormal_pair(rng);
    gen_xor_dataset_with_basis(n, a, b, rng)
}

/// XOR dataset of `n` samples for a given orthonormal basis. Samples lying
/// exactly on a decision line are redrawn.
pub fn gen_xor_dataset_with_basis(n: usize, a: [f64; 2], b: [f64; 2], rng: &mut Rng) -> Result<XorDataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    check_orthonormal(a, b)?;
    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while samples.len() < n {
        let x = [StandardNormal.sample(rng), StandardNormal.sample(rng)];
        let label = XorDataset::label_of(a, b, x);
        if label == 0 {
            continue;
        }
        samples.push(x);
        labels.push(label);
    }
    Ok(XorDataset { samples, labels, a, b })
}

/// Normal of the plane spanned by the two columns of a 3×2 hidden-layer
/// weight matrix (rows are neurons).
pub fn plane_normal(w: &[[f64; 2]; 3]) -> [f64; 3] {
    let c1 = [w[0][0], w[1][0], w[2][0]];
    let c2 = [w[0][1], w[1][1], w[2][1]];
    [
        c1[1] * c2[2] - c1[2] * c2[1],
        c1[2] * c2[0] - c1[0] * c2[2],
        c1[0] * c2[1] - c1[1] * c2[0],
    ]
}

/// Hand-built 2-3-1 ReLU network that solves the XOR problem for basis
/// `(a, b)`.
///
/// Hidden neurons project onto `a`, `b` and `(a+b)/|a+b|`. Before the ReLU
/// the hidden codes lie on a plane; after it, positive samples stay on that
/// plane (or collapse to the origin) while negative samples drop below it, so
/// the output neuron uses the plane normal as its weights. The normal is
/// oriented so that negative samples score below zero, and a small positive
/// bias keeps on-plane points on the positive side.
pub fn analytic_fcn3(a: [f64; 2], b: [f64; 2]) -> Result<Network> {
    check_orthonormal(a, b)?;
    let s = [a[0] + b[0], a[1] + b[1]];
    let norm = dot(s, s).sqrt();
    let hidden = [a, b, [s[0] / norm, s[1] / norm]];
    let mut n = plane_normal(&hidden);
    // Third component equals det[a; b]; fix the orientation so it is positive.
    if n[2] < 0.0 {
        n = [-n[0], -n[1], -n[2]];
    }
    let n_norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    let hidden_layer = Dense::from_parts(2, 3, hidden.iter().flatten().copied().collect(), vec![0.0; 3])?;
    let output = Dense::from_parts(3, 1, n.to_vec(), vec![1e-3 * n_norm])?;
    Network::from_layers(
        vec![2],
        vec![
            Layer::Dense(hidden_layer),
            Layer::Relu,
            Layer::Mask(Mask::new(3)),
            Layer::Dense(output),
        ],
        LossKind::BinaryCrossEntropy,
    )
}

/// Labelled `[n, channels, hw, hw]` images of one oriented Gaussian blob at a
/// random position. The class fixes the blob's orientation and its
/// per-channel intensity profile; position, amplitude and pixel noise vary
/// per sample. Labels cycle through the classes before shuffling, so the set
/// is balanced.
pub fn gen_blob_images(classes: usize, n: usize, hw: usize, channels: usize, rng: &mut Rng) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::InvalidConfig("blob images need at least 2 classes".into()));
    }
    if n == 0 || hw < 4 || channels == 0 {
        return Err(Error::InvalidConfig("blob images need n ≥ 1, hw ≥ 4, channels ≥ 1".into()));
    }
    let profiles: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..channels).map(|_| rng.random_range(0.5..1.5)).collect())
        .collect();
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    labels.shuffle(rng);
    let (major, minor) = (0.3 * hw as f64, 0.09 * hw as f64);
    let mut data = Vec::with_capacity(n * channels * hw * hw);
    for &label in &labels {
        let angle = PI * label as f64 / classes as f64;
        let (sin, cos) = angle.sin_cos();
        let margin = 0.25 * hw as f64;
        let cy = rng.random_range(margin..hw as f64 - margin);
        let cx = rng.random_range(margin..hw as f64 - margin);
        let amp = rng.random_range(0.8..1.2);
        for ch in 0..channels {
            for y in 0..hw {
                for x in 0..hw {
                    let (dy, dx) = (y as f64 - cy, x as f64 - cx);
                    let along = dx * cos + dy * sin;
                    let across = -dx * sin + dy * cos;
                    let v = (-0.5 * (along * along / (major * major) + across * across / (minor * minor))).exp();
                    let noise: f64 = StandardNormal.sample(rng);
                    data.push(amp * profiles[label][ch] * v + 0.1 * noise);
                }
            }
        }
    }
    Dataset::new(Tensor::new(vec![n, channels, hw, hw], data)?, labels, classes)
}
