//! The stacked convolutional-recurrent architecture.
//!
//! A single 3x3 convolution layer (batch-normalized, ReLU, dropout) feeds one
//! or two regression branches. Each branch is a time-distributed dense layer,
//! dropout, a bidirectional GRU and a maxout head. The branched variant has
//! one branch per output channel (valence first, then arousal); the
//! unbranched variant predicts both channels from one shared branch with a
//! two-node maxout head.

mod checkpoint;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::layers::{
    batchnorm_backward, batchnorm_infer, batchnorm_train, bigru_backward, bigru_forward, conv2d,
    conv2d_backward, dropout_backward, dropout_train, maxout, maxout_backward, relu,
    relu_backward, timedist_fc, timedist_fc_backward, BiGruCache, BnCache, GruGrads, GruWeights,
    MaxoutCache,
};
use crate::numerics::{uniform_init, Rng, Tensor};

/// Architecture description. Defaults follow the best configuration with the
/// least parameters: one layer each of CNN, dense and GRU, eight units each.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub feature_dim: usize,
    pub cnn_filters: usize,
    pub fc_units: usize,
    pub gru_units: usize,
    pub branched: bool,
    pub dropout_rate: f64,
    pub maxout_pieces: usize,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl ModelSpec {
    pub fn new(feature_dim: usize) -> Self {
        ModelSpec {
            feature_dim,
            cnn_filters: 8,
            fc_units: 8,
            gru_units: 8,
            branched: true,
            dropout_rate: 0.25,
            maxout_pieces: 2,
            bn_eps: 1e-3,
            bn_momentum: 0.99,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0
            || self.cnn_filters == 0
            || self.fc_units == 0
            || self.gru_units == 0
        {
            return Err(Error::Config("all unit counts must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.maxout_pieces < 2 {
            return Err(Error::Config(format!(
                "maxout needs at least 2 pieces, got {}",
                self.maxout_pieces
            )));
        }
        if self.bn_eps <= 0.0 || !(0.0..=1.0).contains(&self.bn_momentum) {
            return Err(Error::Config("invalid batch-norm settings".into()));
        }
        Ok(())
    }

    /// Branch name prefixes in canonical (output channel) order.
    pub fn branch_prefixes(&self) -> Vec<&'static str> {
        if self.branched {
            vec!["valence", "arousal"]
        } else {
            vec!["shared"]
        }
    }

    /// Output width of each branch head.
    pub fn branch_outputs(&self) -> usize {
        if self.branched {
            1
        } else {
            2
        }
    }
}

/// How a parameter tensor is initialized.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    /// Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
    Glorot { fan_in: usize, fan_out: usize },
    Zero,
    One,
}

/// Canonical parameter listing: name, shape, initializer, trainable flag.
/// Order fixes the RNG draw sequence, so it must never change.
fn parameter_plan(spec: &ModelSpec) -> Vec<(String, Vec<usize>, Init, bool)> {
    let c = spec.cnn_filters;
    let f = spec.feature_dim;
    let u = spec.fc_units;
    let h = spec.gru_units;
    let k = spec.maxout_pieces;
    let o = spec.branch_outputs();

    let mut plan: Vec<(String, Vec<usize>, Init, bool)> = vec![
        (
            "conv.kernel".into(),
            vec![3, 3, 1, c],
            Init::Glorot { fan_in: 9, fan_out: 9 * c },
            true,
        ),
        ("conv.bias".into(), vec![c], Init::Zero, true),
        ("bn.gamma".into(), vec![c], Init::One, true),
        ("bn.beta".into(), vec![c], Init::Zero, true),
        ("bn.running_mean".into(), vec![c], Init::Zero, false),
        ("bn.running_var".into(), vec![c], Init::One, false),
    ];
    for prefix in spec.branch_prefixes() {
        let d = f * c; // flattened per-step conv features
        plan.push((
            format!("{prefix}.fc.weight"),
            vec![d, u],
            Init::Glorot { fan_in: d, fan_out: u },
            true,
        ));
        plan.push((format!("{prefix}.fc.bias"), vec![u], Init::Zero, true));
        for dir in ["fwd", "bwd"] {
            for gate in ["w_z", "w_r", "w_h"] {
                plan.push((
                    format!("{prefix}.gru.{dir}.{gate}"),
                    vec![u, h],
                    Init::Glorot { fan_in: u, fan_out: h },
                    true,
                ));
            }
            for gate in ["u_z", "u_r", "u_h"] {
                plan.push((
                    format!("{prefix}.gru.{dir}.{gate}"),
                    vec![h, h],
                    Init::Glorot { fan_in: h, fan_out: h },
                    true,
                ));
            }
            for gate in ["b_z", "b_r", "b_h"] {
                plan.push((format!("{prefix}.gru.{dir}.{gate}"), vec![h], Init::Zero, true));
            }
        }
        plan.push((
            format!("{prefix}.maxout.pieces"),
            vec![k, 2 * h, o],
            Init::Glorot { fan_in: 2 * h, fan_out: o },
            true,
        ));
        plan.push((format!("{prefix}.maxout.bias"), vec![k, o], Init::Zero, true));
    }
    plan
}

/// Named parameter tensors, ordered lexicographically. Running batch-norm
/// statistics live here too but are excluded from the trainable set.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamMap {
    map: BTreeMap<String, Tensor>,
}

impl ParamMap {
    pub fn get(&self, name: &str) -> &Tensor {
        self.map
            .get(name)
            .unwrap_or_else(|| panic!("parameter {name} missing"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        self.map
            .get_mut(name)
            .unwrap_or_else(|| panic!("parameter {name} missing"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.map.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    /// Running statistics are carried by the model but not trained.
    pub fn is_trainable(name: &str) -> bool {
        !name.starts_with("bn.running_")
    }

    pub fn trainable_iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.map.iter().filter(|(n, _)| Self::is_trainable(n))
    }
}

/// Gradient tensors keyed like the trainable parameters.
pub type ParamGrads = BTreeMap<String, Tensor>;

/// Intermediates of one branch retained for the backward pass.
struct BranchCache {
    drop_mask: Tensor,
    bigru: BiGruCache,
    gru_out: Tensor,
    head: MaxoutCache,
}

/// Everything the full-model backward pass needs from one training forward.
pub struct ForwardCache {
    x4: Tensor,
    conv_out: Tensor,
    bn: BnCache,
    bn_out: Tensor,
    cnn_drop_mask: Tensor,
    flat: Tensor,
    branches: Vec<BranchCache>,
}

impl ForwardCache {
    /// Raw convolution output (before normalization), the target of the
    /// activity regularization term.
    pub fn conv_activations(&self) -> &Tensor {
        &self.conv_out
    }
}

/// A built network: spec plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    params: ParamMap,
}

impl Model {
    /// Initializes all parameters from the generator: Glorot-uniform weights,
    /// zero biases, unit batch-norm scale.
    pub fn build(spec: ModelSpec, rng: &mut Rng) -> Result<Model> {
        spec.validate()?;
        let mut map = BTreeMap::new();
        for (name, shape, init, _) in parameter_plan(&spec) {
            let tensor = match init {
                Init::Glorot { fan_in, fan_out } => {
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    uniform_init(rng, &shape, limit)
                }
                Init::Zero => Tensor::zeros(&shape),
                Init::One => Tensor::full(&shape, 1.0),
            };
            map.insert(name, tensor);
        }
        Ok(Model {
            spec,
            params: ParamMap { map },
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamMap {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamMap {
        &mut self.params
    }

    /// Exact count of trainable scalars (running statistics excluded).
    pub fn count_params(spec: &ModelSpec) -> usize {
        parameter_plan(spec)
            .iter()
            .filter(|(_, _, _, trainable)| *trainable)
            .map(|(_, shape, _, _)| shape.iter().product::<usize>())
            .sum()
    }

    fn gru_weights<'a>(&'a self, prefix: &str, dir: &str) -> GruWeights<'a> {
        let p = |gate: &str| self.params.get(&format!("{prefix}.gru.{dir}.{gate}"));
        GruWeights {
            w_z: p("w_z"),
            w_r: p("w_r"),
            w_h: p("w_h"),
            u_z: p("u_z"),
            u_r: p("u_r"),
            u_h: p("u_h"),
            b_z: p("b_z"),
            b_r: p("b_r"),
            b_h: p("b_h"),
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize)> {
        if x.rank() != 3 || x.shape()[2] != self.spec.feature_dim {
            return Err(Error::dimension(
                "model input",
                x.shape(),
                &[0, 0, self.spec.feature_dim],
            ));
        }
        Ok((x.shape()[0], x.shape()[1]))
    }

    /// Deterministic inference: running-statistic batch norm, no dropout,
    /// outputs clamped to [-1, 1].
    pub fn forward_infer(&self, x: &Tensor) -> Result<Tensor> {
        let (b, l) = self.check_input(x)?;
        let f = self.spec.feature_dim;
        let c = self.spec.cnn_filters;

        let x4 = x.reshape(&[b, l, f, 1])?;
        let conv_out = conv2d(&x4, self.params.get("conv.kernel"), self.params.get("conv.bias"))?;
        let bn_out = batchnorm_infer(
            &conv_out,
            self.params.get("bn.gamma"),
            self.params.get("bn.beta"),
            self.params.get("bn.running_mean"),
            self.params.get("bn.running_var"),
            self.spec.bn_eps,
        )?;
        let act = relu(&bn_out);
        let flat = act.reshape(&[b, l, f * c])?;

        let mut pred = Tensor::zeros(&[b, l, 2]);
        for (bi, prefix) in self.spec.branch_prefixes().iter().enumerate() {
            let fc_out = timedist_fc(
                &flat,
                self.params.get(&format!("{prefix}.fc.weight")),
                self.params.get(&format!("{prefix}.fc.bias")),
            )?;
            let (gru_out, _) = bigru_forward(
                &fc_out,
                &self.gru_weights(prefix, "fwd"),
                &self.gru_weights(prefix, "bwd"),
            )?;
            let (head, _) = maxout(
                &gru_out,
                self.params.get(&format!("{prefix}.maxout.pieces")),
                self.params.get(&format!("{prefix}.maxout.bias")),
            )?;
            let o = self.spec.branch_outputs();
            for bb in 0..b {
                for t in 0..l {
                    for oi in 0..o {
                        let ch = if self.spec.branched { bi } else { oi };
                        *pred.at_mut(&[bb, t, ch]) = head.at(&[bb, t, oi]);
                    }
                }
            }
        }
        Ok(pred.map(|v| v.clamp(-1.0, 1.0)))
    }

    /// Training forward: batch-statistic normalization (running statistics
    /// are updated in place), dropout driven by `rng`, unclamped outputs.
    pub fn forward_train(&mut self, x: &Tensor, rng: &mut Rng) -> Result<(Tensor, ForwardCache)> {
        let (b, l) = self.check_input(x)?;
        let f = self.spec.feature_dim;
        let c = self.spec.cnn_filters;
        let rate = self.spec.dropout_rate;

        let x4 = x.reshape(&[b, l, f, 1])?;
        let conv_out = conv2d(&x4, self.params.get("conv.kernel"), self.params.get("conv.bias"))?;
        let (bn_out, bn_cache) = batchnorm_train(
            &conv_out,
            self.params.get("bn.gamma"),
            self.params.get("bn.beta"),
            self.spec.bn_eps,
        )?;
        // fold batch statistics into the running estimates
        let momentum = self.spec.bn_momentum;
        {
            let rm = self.params.get_mut("bn.running_mean");
            for (i, v) in rm.data_mut().iter_mut().enumerate() {
                *v = momentum * *v + (1.0 - momentum) * bn_cache.batch_mean[i];
            }
            let rv = self.params.get_mut("bn.running_var");
            for (i, v) in rv.data_mut().iter_mut().enumerate() {
                *v = momentum * *v + (1.0 - momentum) * bn_cache.batch_var[i];
            }
        }
        let act = relu(&bn_out);
        let (cnn_drop, cnn_drop_mask) = dropout_train(&act, rate, rng)?;
        let flat = cnn_drop.reshape(&[b, l, f * c])?;

        let mut pred = Tensor::zeros(&[b, l, 2]);
        let mut branches = Vec::new();
        for (bi, prefix) in self.spec.branch_prefixes().iter().enumerate() {
            let fc_out = timedist_fc(
                &flat,
                self.params.get(&format!("{prefix}.fc.weight")),
                self.params.get(&format!("{prefix}.fc.bias")),
            )?;
            let (gru_in, drop_mask) = dropout_train(&fc_out, rate, rng)?;
            let (gru_out, bigru) = bigru_forward(
                &gru_in,
                &self.gru_weights(prefix, "fwd"),
                &self.gru_weights(prefix, "bwd"),
            )?;
            let (head, head_cache) = maxout(
                &gru_out,
                self.params.get(&format!("{prefix}.maxout.pieces")),
                self.params.get(&format!("{prefix}.maxout.bias")),
            )?;
            let o = self.spec.branch_outputs();
            for bb in 0..b {
                for t in 0..l {
                    for oi in 0..o {
                        let ch = if self.spec.branched { bi } else { oi };
                        *pred.at_mut(&[bb, t, ch]) = head.at(&[bb, t, oi]);
                    }
                }
            }
            branches.push(BranchCache {
                drop_mask,
                bigru,
                gru_out,
                head: head_cache,
            });
        }
        Ok((
            pred,
            ForwardCache {
                x4,
                conv_out,
                bn: bn_cache,
                bn_out,
                cnn_drop_mask,
                flat,
                branches,
            },
        ))
    }

    /// Full backward pass through every layer and time step.
    ///
    /// `grad_pred` is the loss gradient at the network output `[B, L, 2]`;
    /// `conv_activity_grad`, when present, is added at the raw convolution
    /// output (the activity regularization path).
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_pred: &Tensor,
        conv_activity_grad: Option<&Tensor>,
    ) -> Result<ParamGrads> {
        let [b, l, f, c]: [usize; 4] = cache.conv_out.shape().try_into().unwrap();
        let mut grads = ParamGrads::new();
        let mut dflat = Tensor::zeros(cache.flat.shape());

        for (bi, prefix) in self.spec.branch_prefixes().iter().enumerate() {
            let branch = &cache.branches[bi];
            let o = self.spec.branch_outputs();
            let mut g_head = Tensor::zeros(&[b, l, o]);
            for bb in 0..b {
                for t in 0..l {
                    for oi in 0..o {
                        let ch = if self.spec.branched { bi } else { oi };
                        *g_head.at_mut(&[bb, t, oi]) = grad_pred.at(&[bb, t, ch]);
                    }
                }
            }
            let pieces = self.params.get(&format!("{prefix}.maxout.pieces"));
            let (dgru_out, dpieces, dhead_bias) =
                maxout_backward(&branch.gru_out, pieces, &branch.head, &g_head)?;
            grads.insert(format!("{prefix}.maxout.pieces"), dpieces);
            grads.insert(format!("{prefix}.maxout.bias"), dhead_bias);

            let (dgru_in, gf, gb) = bigru_backward(
                &self.gru_weights(prefix, "fwd"),
                &self.gru_weights(prefix, "bwd"),
                &branch.bigru,
                &dgru_out,
            )?;
            let mut insert_gru = |dir: &str, g: GruGrads| {
                grads.insert(format!("{prefix}.gru.{dir}.w_z"), g.w_z);
                grads.insert(format!("{prefix}.gru.{dir}.w_r"), g.w_r);
                grads.insert(format!("{prefix}.gru.{dir}.w_h"), g.w_h);
                grads.insert(format!("{prefix}.gru.{dir}.u_z"), g.u_z);
                grads.insert(format!("{prefix}.gru.{dir}.u_r"), g.u_r);
                grads.insert(format!("{prefix}.gru.{dir}.u_h"), g.u_h);
                grads.insert(format!("{prefix}.gru.{dir}.b_z"), g.b_z);
                grads.insert(format!("{prefix}.gru.{dir}.b_r"), g.b_r);
                grads.insert(format!("{prefix}.gru.{dir}.b_h"), g.b_h);
            };
            insert_gru("fwd", gf);
            insert_gru("bwd", gb);

            let dfc_out = dropout_backward(&branch.drop_mask, &dgru_in)?;
            let (dflat_b, dw, db) = timedist_fc_backward(
                &cache.flat,
                self.params.get(&format!("{prefix}.fc.weight")),
                &dfc_out,
            )?;
            grads.insert(format!("{prefix}.fc.weight"), dw);
            grads.insert(format!("{prefix}.fc.bias"), db);
            dflat.add_assign(&dflat_b);
        }

        let dcnn_drop = dflat.reshape(&[b, l, f, c])?;
        let dact = dropout_backward(&cache.cnn_drop_mask, &dcnn_drop)?;
        let dbn_out = relu_backward(&cache.bn_out, &dact);
        let (mut dconv_out, dgamma, dbeta) =
            batchnorm_backward(&cache.bn, self.params.get("bn.gamma"), &dbn_out)?;
        grads.insert("bn.gamma".into(), dgamma);
        grads.insert("bn.beta".into(), dbeta);
        if let Some(ag) = conv_activity_grad {
            dconv_out.add_assign(ag);
        }
        let (_, dkernel, dbias) =
            conv2d_backward(&cache.x4, self.params.get("conv.kernel"), &dconv_out)?;
        grads.insert("conv.kernel".into(), dkernel);
        grads.insert("conv.bias".into(), dbias);
        Ok(grads)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        checkpoint::save(self, path)
    }

    pub fn load(path: &std::path::Path) -> Result<Model> {
        checkpoint::load(path)
    }
}
