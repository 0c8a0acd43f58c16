//! The trainable network: per-modality encoders, the filter-bank graph trunk
//! over a complete modality graph, pooling, fusion and the dense head.

pub mod checkpoint;
pub mod config;
pub mod encoder;
pub mod layers;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::ModalityGraph;
use crate::tensor::{Tape, Tensor, Var};

pub use config::{Activation, EncoderConfig, InputSpec, MffbmConfig, Modality, ModalitySubset, EMBED_DIM};
use encoder::{encode, encoder_shapes, EncoderVars};
use layers::{fuse, global_average_pool, head_logits, mffbm_block, propagation_matrix, BlockParams};

/// One subject's per-modality feature sequences (`time x width` each).
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub subject_id: String,
    pub features: BTreeMap<Modality, Tensor>,
    /// Optional response-block lengths (rows) per modality, used by
    /// shuffle augmentation; empty when the subject is not segmented.
    pub segments: BTreeMap<Modality, Vec<usize>>,
    pub label: usize,
}

/// Padded model input: one `(n * max_len) x width` block per configured
/// modality, in config order.
#[derive(Clone, Debug)]
pub struct Batch {
    pub n: usize,
    pub inputs: Vec<Tensor>,
    pub labels: Vec<usize>,
}

/// First `max_len` rows of `seq`, zero-padded at the end.
fn pad_rows(seq: &Tensor, max_len: usize, out: &mut Vec<f64>) {
    let keep = seq.rows().min(max_len);
    out.extend_from_slice(&seq.data()[..keep * seq.cols()]);
    out.resize(out.len() + (max_len - keep) * seq.cols(), 0.0);
}

impl Batch {
    pub fn from_samples(config: &MffbmConfig, samples: &[&Sample]) -> Result<Batch> {
        if samples.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let mut inputs = Vec::with_capacity(config.inputs.len());
        for spec in &config.inputs {
            let mut data = Vec::with_capacity(samples.len() * spec.max_len * spec.width);
            for s in samples {
                let seq = s.features.get(&spec.modality).ok_or_else(|| Error::Subject {
                    subject: s.subject_id.clone(),
                    reason: format!("missing {} features", spec.modality),
                })?;
                if seq.cols() != spec.width {
                    return Err(Error::Subject {
                        subject: s.subject_id.clone(),
                        reason: format!("{} features have width {}, expected {}", spec.modality, seq.cols(), spec.width),
                    });
                }
                pad_rows(seq, spec.max_len, &mut data);
            }
            inputs.push(Tensor::matrix(samples.len() * spec.max_len, spec.width, data)?);
        }
        Ok(Batch {
            n: samples.len(),
            inputs,
            labels: samples.iter().map(|s| s.label).collect(),
        })
    }
}

#[derive(Clone, Copy, Debug)]
struct DenseIdx {
    w: usize,
    b: usize,
}

#[derive(Clone, Copy, Debug)]
struct EncoderIdx {
    stages: [DenseIdx; 4],
}

#[derive(Clone, Debug)]
struct GraphLayerIdx {
    low: Vec<usize>,
    high: usize,
}

/// Where each parameter lives in the flat parameter list.
#[derive(Clone, Debug)]
struct Layout {
    encoders: Vec<EncoderIdx>,
    graph: Vec<GraphLayerIdx>,
    /// One head on the fused vector when the graph trunk runs or a single
    /// modality is used; otherwise one head per modality with summed logits.
    heads: Vec<Vec<DenseIdx>>,
}

#[derive(Clone, Debug)]
struct ParamSpec {
    name: String,
    shape: [usize; 2],
    is_bias: bool,
}

fn build_layout(config: &MffbmConfig) -> (Layout, Vec<ParamSpec>) {
    let mut specs = Vec::new();
    let mut push = |name: String, shape: [usize; 2], is_bias: bool| {
        specs.push(ParamSpec { name, shape, is_bias });
        specs.len() - 1
    };
    let dense_pair = |push: &mut dyn FnMut(String, [usize; 2], bool) -> usize, prefix: &str, w: [usize; 2], b: [usize; 2]| DenseIdx {
        w: push(format!("{prefix}.weight"), w, false),
        b: push(format!("{prefix}.bias"), b, true),
    };

    let stage_names = ["conv1", "conv2", "dense1", "dense2"];
    let mut encoders = Vec::new();
    for spec in &config.inputs {
        let shapes = encoder_shapes(&config.encoder, spec.width);
        let stages = [0, 1, 2, 3].map(|i| {
            let prefix = format!("{}.{}", spec.modality, stage_names[i]);
            dense_pair(&mut push, &prefix, shapes[i].0, shapes[i].1)
        });
        encoders.push(EncoderIdx { stages });
    }

    let mut graph = Vec::new();
    if config.uses_graph() {
        let mut d_in = EMBED_DIM;
        for l in 0..config.n_layers {
            let low = (0..config.k())
                .map(|i| push(format!("graph.{l}.low.{i}"), [d_in, config.hidden], false))
                .collect();
            let high = push(format!("graph.{l}.high"), [d_in, config.hidden], false);
            graph.push(GraphLayerIdx { low, high });
            d_in = config.hidden;
        }
    }

    let head = |push: &mut dyn FnMut(String, [usize; 2], bool) -> usize, prefix: &str, d_in: usize| {
        let mut widths = config.head_hidden.clone();
        widths.push(config.n_classes);
        let mut prev = d_in;
        let mut layers = Vec::new();
        for (i, &w) in widths.iter().enumerate() {
            layers.push(dense_pair(push, &format!("{prefix}.{i}"), [prev, w], [1, w]));
            prev = w;
        }
        layers
    };
    let heads = if config.uses_graph() || config.inputs.len() == 1 {
        let graph_width = if config.uses_graph() { config.hidden } else { 0 };
        vec![head(&mut push, "head", graph_width + EMBED_DIM * config.inputs.len())]
    } else {
        config
            .inputs
            .iter()
            .map(|s| head(&mut push, &format!("head.{}", s.modality), EMBED_DIM))
            .collect()
    };
    (Layout { encoders, graph, heads }, specs)
}

/// Tape handles produced by one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    /// Parameter leaves, aligned with [`MffbmModel::params`].
    pub params: Vec<Var>,
    /// Per-modality `n x 64` embeddings in config order.
    pub embeddings: Vec<Var>,
    /// Pooled trunk output when the graph trunk ran.
    pub graph: Option<Var>,
    /// Fused representation (graph part first, then embeddings).
    pub z: Var,
    pub logits: Var,
    pub probs: Var,
}

#[derive(Clone, Debug)]
pub struct MffbmModel {
    config: MffbmConfig,
    names: Vec<String>,
    params: Vec<Tensor>,
    layout: Layout,
    /// Per-subject `Ã ⊙ M` over the modality nodes.
    kernel: Tensor,
}

impl MffbmModel {
    /// Fresh model with Glorot-uniform weights and zero biases, drawn from
    /// `config.seed` in parameter order.
    pub fn new(config: MffbmConfig) -> Result<Self> {
        config.validate()?;
        let (layout, specs) = build_layout(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = specs
            .iter()
            .map(|s| {
                let [r, c] = s.shape;
                if s.is_bias {
                    return Tensor::zeros(&s.shape);
                }
                let bound = (6.0 / (r + c) as f64).sqrt();
                let data = (0..r * c).map(|_| rng.gen_range(-bound..=bound)).collect();
                Tensor::matrix(r, c, data).expect("positive dims")
            })
            .collect();
        let kernel = Self::graph_kernel(&config)?;
        Ok(MffbmModel {
            config,
            names: specs.into_iter().map(|s| s.name).collect(),
            params,
            layout,
            kernel,
        })
    }

    /// Rebuilds a model from named parameters, checking names and shapes
    /// against the layout implied by `config`.
    pub fn from_params(config: MffbmConfig, named: Vec<(String, Tensor)>) -> Result<Self> {
        config.validate()?;
        let (layout, specs) = build_layout(&config);
        if named.len() != specs.len() {
            return Err(Error::Config(format!(
                "expected {} parameter tensors, found {}",
                specs.len(),
                named.len()
            )));
        }
        let mut params = Vec::with_capacity(specs.len());
        for (spec, (name, t)) in specs.iter().zip(named) {
            if name != spec.name {
                return Err(Error::Config(format!("expected parameter {}, found {name}", spec.name)));
            }
            if t.shape() != spec.shape {
                return Err(Error::Config(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    t.shape(),
                    spec.shape
                )));
            }
            if !t.is_finite() {
                return Err(Error::Config(format!("parameter {name} has non-finite values")));
            }
            params.push(t);
        }
        let kernel = Self::graph_kernel(&config)?;
        Ok(MffbmModel {
            config,
            names: specs.into_iter().map(|s| s.name).collect(),
            params,
            layout,
            kernel,
        })
    }

    fn graph_kernel(config: &MffbmConfig) -> Result<Tensor> {
        let mut g = ModalityGraph::complete(config.inputs.len());
        if let Some(mask) = config.mask_tensor()? {
            g = g.with_mask(mask)?;
        }
        Ok(g.masked_adjacency())
    }

    pub fn config(&self) -> &MffbmConfig {
        &self.config
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn n_weights(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    pub fn named_params(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.params)
    }

    /// Records the full network on `tape`.
    pub fn forward(&self, tape: &mut Tape, batch: &Batch) -> Result<ForwardPass> {
        let cfg = &self.config;
        if batch.inputs.len() != cfg.inputs.len() {
            return Err(Error::invalid(format!(
                "batch has {} modalities, model expects {}",
                batch.inputs.len(),
                cfg.inputs.len()
            )));
        }
        let params: Vec<Var> = self.params.iter().map(|p| tape.param(p.clone())).collect();
        let pair = |d: DenseIdx| (params[d.w], params[d.b]);

        let mut embeddings = Vec::with_capacity(cfg.inputs.len());
        for ((spec, x), enc) in cfg.inputs.iter().zip(&batch.inputs).zip(&self.layout.encoders) {
            if x.shape() != [batch.n * spec.max_len, spec.width] {
                return Err(Error::InvalidShape {
                    shape: x.shape().to_vec(),
                    reason: format!("{} input does not match batch geometry", spec.modality),
                });
            }
            let xv = tape.constant(x.clone());
            let vars = EncoderVars {
                conv1: pair(enc.stages[0]),
                conv2: pair(enc.stages[1]),
                dense1: pair(enc.stages[2]),
                dense2: pair(enc.stages[3]),
            };
            embeddings.push(encode(tape, xv, spec.max_len, &cfg.encoder, &vars)?);
        }

        let graph = if cfg.uses_graph() {
            let m = cfg.inputs.len();
            let stacked = tape.concat_cols(&embeddings)?;
            let mut h = tape.reshape(stacked, &[batch.n * m, EMBED_DIM])?;
            let kernel = tape.constant(propagation_matrix(&self.kernel, batch.n)?);
            let block = BlockParams {
                phi: cfg.phi,
                phi_i: &cfg.phi_i,
                a: cfg.a,
                activation: cfg.trunk_activation,
            };
            for layer in &self.layout.graph {
                let lows: Vec<Var> = layer.low.iter().map(|&i| params[i]).collect();
                h = mffbm_block(tape, h, kernel, &lows, params[layer.high], &block)?;
            }
            Some(global_average_pool(tape, h, m)?)
        } else {
            None
        };

        let z = fuse(tape, graph, &embeddings)?;
        let head_vars =
            |layers: &Vec<DenseIdx>| -> Vec<(Var, Var)> { layers.iter().map(|&d| pair(d)).collect() };
        let logits = if self.layout.heads.len() == 1 {
            head_logits(tape, z, &head_vars(&self.layout.heads[0]))?
        } else {
            let mut acc: Option<Var> = None;
            for (u, layers) in embeddings.iter().zip(&self.layout.heads) {
                let l = head_logits(tape, *u, &head_vars(layers))?;
                acc = Some(match acc {
                    Some(prev) => tape.add(prev, l)?,
                    None => l,
                });
            }
            acc.expect("at least one modality")
        };
        let probs = tape.softmax(logits)?;
        Ok(ForwardPass {
            params,
            embeddings,
            graph,
            z,
            logits,
            probs,
        })
    }

    /// Class probabilities, `n x c`.
    pub fn predict(&self, batch: &Batch) -> Result<Tensor> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, batch)?;
        Ok(tape.value(out.probs).clone())
    }

    /// Probabilities for a list of samples, evaluated in chunks.
    pub fn predict_samples(&self, samples: &[&Sample]) -> Result<Tensor> {
        const CHUNK: usize = 64;
        let mut rows = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(CHUNK) {
            let p = self.predict(&Batch::from_samples(&self.config, chunk)?)?;
            rows.extend(p.to_rows());
        }
        Tensor::from_rows(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_config(n_layers: usize, modalities: &[Modality]) -> MffbmConfig {
        MffbmConfig {
            n_layers,
            hidden: 8,
            inputs: modalities
                .iter()
                .enumerate()
                .map(|(i, &m)| InputSpec {
                    modality: m,
                    width: 2 + i,
                    max_len: 9,
                })
                .collect(),
            encoder: EncoderConfig {
                channels: 3,
                kernel: 3,
                pool: 2,
                dense_hidden: 4,
            },
            head_hidden: vec![6, 5],
            ..Default::default()
        }
    }

    pub(crate) fn random_samples(cfg: &MffbmConfig, n: usize, seed: u64) -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let features = cfg
                    .inputs
                    .iter()
                    .map(|s| {
                        let len = rng.gen_range(5..14);
                        let data = (0..len * s.width).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        (s.modality, Tensor::matrix(len, s.width, data).unwrap())
                    })
                    .collect();
                Sample {
                    subject_id: format!("s{i}"),
                    features,
                    segments: BTreeMap::new(),
                    label: i % cfg.n_classes,
                }
            })
            .collect()
    }

    #[test]
    fn forward_shapes() {
        let cfg = small_config(2, &Modality::ALL);
        let model = MffbmModel::new(cfg.clone()).unwrap();
        let samples = random_samples(&cfg, 5, 1);
        let refs: Vec<&Sample> = samples.iter().collect();
        let batch = Batch::from_samples(&cfg, &refs).unwrap();
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, &batch).unwrap();
        assert_eq!(tape.value(out.z).shape(), &[5, 8 + 3 * 64]);
        assert_eq!(tape.value(out.probs).shape(), &[5, 3]);
        for r in 0..5 {
            let s: f64 = tape.value(out.probs).row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn default_width_fuses_to_256() {
        let mut cfg = small_config(2, &Modality::ALL);
        cfg.hidden = 64;
        let model = MffbmModel::new(cfg.clone()).unwrap();
        let samples = random_samples(&cfg, 2, 3);
        let refs: Vec<&Sample> = samples.iter().collect();
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, &Batch::from_samples(&cfg, &refs).unwrap()).unwrap();
        assert_eq!(tape.value(out.z).cols(), 256);
    }

    #[test]
    fn single_modality_bypasses_trunk() {
        let cfg = small_config(2, &[Modality::Audio]);
        let model = MffbmModel::new(cfg.clone()).unwrap();
        assert!(model.names().iter().all(|n| !n.starts_with("graph")));
        let samples = random_samples(&cfg, 3, 2);
        let refs: Vec<&Sample> = samples.iter().collect();
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, &Batch::from_samples(&cfg, &refs).unwrap()).unwrap();
        assert!(out.graph.is_none());
        assert_eq!(tape.value(out.z).cols(), 64);
    }

    #[test]
    fn zero_layers_uses_per_modality_heads() {
        let cfg = small_config(0, &Modality::ALL);
        let model = MffbmModel::new(cfg.clone()).unwrap();
        assert!(model.names().iter().any(|n| n.starts_with("head.gaze.")));
        let samples = random_samples(&cfg, 4, 5);
        let refs: Vec<&Sample> = samples.iter().collect();
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, &Batch::from_samples(&cfg, &refs).unwrap()).unwrap();
        assert!(out.graph.is_none());
        assert_eq!(tape.value(out.z).cols(), 3 * 64);
        assert_eq!(tape.value(out.probs).shape(), &[4, 3]);
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = small_config(2, &Modality::ALL);
        let samples = random_samples(&cfg, 4, 9);
        let refs: Vec<&Sample> = samples.iter().collect();
        let batch = Batch::from_samples(&cfg, &refs).unwrap();
        let a = MffbmModel::new(cfg.clone()).unwrap().predict(&batch).unwrap();
        let b = MffbmModel::new(cfg.clone()).unwrap().predict(&batch).unwrap();
        assert_eq!(a, b);
        let mut other = cfg;
        other.seed = 1;
        assert_ne!(MffbmModel::new(other).unwrap().predict(&batch).unwrap(), a);
    }

    #[test]
    fn batch_validation_names_subject() {
        let cfg = small_config(2, &Modality::ALL);
        let mut samples = random_samples(&cfg, 2, 4);
        samples[1].features.remove(&Modality::Gaze);
        let refs: Vec<&Sample> = samples.iter().collect();
        match Batch::from_samples(&cfg, &refs) {
            Err(Error::Subject { subject, .. }) => assert_eq!(subject, "s1"),
            other => panic!("unexpected {other:?}"),
        }
        let mut samples = random_samples(&cfg, 2, 4);
        samples[0].features.insert(Modality::Audio, Tensor::zeros(&[6, 7]));
        let refs: Vec<&Sample> = samples.iter().collect();
        assert!(matches!(Batch::from_samples(&cfg, &refs), Err(Error::Subject { .. })));
    }

    #[test]
    fn padding_and_truncation() {
        let seq = Tensor::matrix(3, 2, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let mut out = Vec::new();
        pad_rows(&seq, 5, &mut out);
        assert_eq!(out, vec![1., 2., 3., 4., 5., 6., 0., 0., 0., 0.]);
        out.clear();
        pad_rows(&seq, 2, &mut out);
        assert_eq!(out, vec![1., 2., 3., 4.]);
    }

    #[test]
    fn glorot_bounds_and_zero_biases() {
        let model = MffbmModel::new(small_config(2, &Modality::ALL)).unwrap();
        for (name, t) in model.named_params() {
            if name.ends_with(".bias") {
                assert_eq!(t.max_abs(), 0.0);
            } else {
                let (r, c) = t.dims2().unwrap();
                assert!(t.max_abs() <= (6.0 / (r + c) as f64).sqrt());
            }
        }
    }

    fn numeric_loss(model: &MffbmModel, batch: &Batch) -> f64 {
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, batch).unwrap();
        let loss = tape.nll(out.probs, &batch.labels).unwrap();
        tape.value(loss).data()[0]
    }

    #[test]
    fn every_parameter_matches_finite_differences() {
        let mut cfg = small_config(2, &Modality::ALL);
        cfg.seed = 11;
        let mut model = MffbmModel::new(cfg.clone()).unwrap();
        // nonzero biases so their gradients are exercised away from zero
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for p in model.params_mut() {
            if p.rows() == 1 {
                p.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.1..0.1));
            }
        }
        let samples = random_samples(&cfg, 6, 13);
        let refs: Vec<&Sample> = samples.iter().collect();
        let batch = Batch::from_samples(&cfg, &refs).unwrap();
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, &batch).unwrap();
        let loss = tape.nll(out.probs, &batch.labels).unwrap();
        let grads = tape.backward(loss).unwrap();
        let h = 1e-6;
        for (pi, var) in out.params.iter().enumerate() {
            let analytic = grads.get(*var).unwrap().clone();
            let mut numeric = Tensor::zeros(analytic.shape());
            for i in 0..analytic.numel() {
                let orig = model.params()[pi].data()[i];
                model.params_mut()[pi].data_mut()[i] = orig + h;
                let up = numeric_loss(&model, &batch);
                model.params_mut()[pi].data_mut()[i] = orig - h;
                let down = numeric_loss(&model, &batch);
                model.params_mut()[pi].data_mut()[i] = orig;
                numeric.data_mut()[i] = (up - down) / (2.0 * h);
            }
            let diff = analytic.sub(&numeric).unwrap();
            let norm = |t: &Tensor| t.data().iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = norm(&analytic).max(norm(&numeric));
            let rel = if scale < 1e-9 { norm(&diff) } else { norm(&diff) / scale };
            assert!(rel < 1e-4, "{}: relative error {rel}", model.names()[pi]);
        }
    }

    #[test]
    fn from_params_validates() {
        let cfg = small_config(2, &Modality::ALL);
        let model = MffbmModel::new(cfg.clone()).unwrap();
        let named: Vec<(String, Tensor)> = model.named_params().map(|(n, t)| (n.to_string(), t.clone())).collect();
        let back = MffbmModel::from_params(cfg.clone(), named.clone()).unwrap();
        assert_eq!(back.params(), model.params());
        let mut bad = named.clone();
        bad[0].1 = Tensor::zeros(&[1, 1]);
        assert!(MffbmModel::from_params(cfg.clone(), bad).is_err());
        let mut short = named;
        short.pop();
        assert!(MffbmModel::from_params(cfg, short).is_err());
    }
}
