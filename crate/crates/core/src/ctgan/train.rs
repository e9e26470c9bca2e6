use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::encode::{decode_row, encode_rows, EncodedLayout, SpanKind};
use super::gmm::{fit_normalizer, GmmNormalizer};
use super::nn::{
    sample_gumbel, Activation, AdamState, ForwardOptions, MlpNetwork, NetworkRole, Segment,
};
use crate::data::{ColumnSchema, FeatureKind, TabularDataset};
use crate::error::{bail, Result};
use crate::math::{exp, ln, softplus};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::synthetic::{Provenance, SyntheticBatch, Technique};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CtganConfig {
    pub latent_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub batch_size: usize,
    pub epochs: usize,
    pub gumbel_tau: f64,
    /// Discrete columns (the label included) that can be conditioned on.
    /// `None` means every discrete column.
    pub condition_columns: Option<Vec<String>>,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Target for real rows in the discriminator loss.
    pub real_label: f64,
    pub leaky_slope: f64,
    /// Feed one-hot argmax blocks to the discriminator during training while
    /// differentiating the soft values. When false the soft Gumbel-softmax
    /// values are fed instead; sampling always emits one-hot blocks.
    pub straight_through: bool,
    /// Discriminator updates per generator update.
    pub discriminator_steps: usize,
    /// Rows the discriminator scores jointly; 1 scores rows one at a time.
    /// Packing makes a generator that drops modes easier to spot.
    pub pac: usize,
    /// Decay of an exponential moving average of the generator weights; the
    /// trained model keeps the (bias-corrected) average. `None` keeps the
    /// last iterate.
    pub generator_ema: Option<f64>,
    pub max_modes: usize,
    pub em_iters: usize,
    pub seed: u64,
}

impl Default for CtganConfig {
    fn default() -> Self {
        Self {
            latent_dim: 64,
            generator_hidden: vec![128, 128],
            discriminator_hidden: vec![128, 128],
            batch_size: 250,
            epochs: 300,
            gumbel_tau: 0.2,
            condition_columns: None,
            learning_rate: 2e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.9,
            real_label: 0.9,
            leaky_slope: 0.2,
            straight_through: true,
            discriminator_steps: 1,
            pac: 10,
            generator_ema: Some(0.999),
            max_modes: 5,
            em_iters: 100,
            seed: 0,
        }
    }
}

impl CtganConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            bail!(Config, "batch_size must be at least 2");
        }
        if self.epochs == 0 {
            bail!(Config, "epochs must be at least 1");
        }
        if self.latent_dim == 0 || self.max_modes == 0 {
            bail!(Config, "latent_dim and max_modes must be positive");
        }
        if !(self.gumbel_tau > 0.0) || !(self.learning_rate > 0.0) {
            bail!(Config, "gumbel_tau and learning_rate must be positive");
        }
        if self.pac == 0 || !self.batch_size.is_multiple_of(self.pac) {
            bail!(
                Config,
                "pac {} must be positive and divide batch_size {}",
                self.pac,
                self.batch_size
            );
        }
        if let Some(d) = self.generator_ema {
            if !(0.0..1.0).contains(&d) {
                bail!(Config, "generator_ema must lie in [0, 1)");
            }
        }
        if !(0.0..=1.0).contains(&self.real_label) {
            bail!(Config, "real_label must lie in [0, 1]");
        }
        Ok(())
    }
}

/// One conditionable column and its block in the condition vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSlot {
    pub column: usize,
    pub name: String,
    pub offset: usize,
    pub levels: usize,
    /// Training frequency of each level.
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub generator: f64,
    pub discriminator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtganModel {
    /// Feature columns followed by the label column.
    pub columns: Vec<ColumnSchema>,
    pub normalizers: Vec<Option<GmmNormalizer>>,
    pub layout: EncodedLayout,
    pub conditions: Vec<ConditionSlot>,
    pub condition_width: usize,
    pub generator: MlpNetwork,
    pub discriminator: MlpNetwork,
    pub config: CtganConfig,
    pub log: Vec<EpochLoss>,
}

fn table_row(ds: &TabularDataset, i: usize) -> Vec<f64> {
    let mut r = ds.row(i).to_vec();
    r.push(ds.labels()[i] as f64);
    r
}

fn output_activation(layout: &EncodedLayout, tau: f64) -> Activation {
    let mut segments = Vec::new();
    for span in &layout.spans {
        match span.kind {
            SpanKind::Continuous { modes } => {
                segments.push(Segment {
                    width: 1,
                    activation: Activation::Tanh,
                });
                segments.push(Segment {
                    width: modes,
                    activation: Activation::GumbelSoftmax { tau },
                });
            }
            SpanKind::Discrete { levels } => segments.push(Segment {
                width: levels,
                activation: Activation::GumbelSoftmax { tau },
            }),
        }
    }
    Activation::Segmented { segments }
}

fn pick_weighted(weights: &[f64], rng: &mut Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn bce_with_logits(logit: f64, target: f64) -> f64 {
    softplus(logit) - target * logit
}

fn concat_cols(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), a.cols() + b.cols());
    for i in 0..a.rows() {
        let r = out.row_mut(i);
        r[..a.cols()].copy_from_slice(a.row(i));
        r[a.cols()..].copy_from_slice(b.row(i));
    }
    out
}

struct Sampler<'a> {
    slots: &'a [ConditionSlot],
    /// `rows[slot][level]`: training rows carrying that level.
    rows: Vec<Vec<Vec<usize>>>,
    log_weights: Vec<Vec<f64>>,
    width: usize,
}

impl Sampler<'_> {
    /// Condition vectors plus one matching real row per batch entry.
    fn draw(&self, batch: usize, rng: &mut Rng) -> (Matrix, Vec<usize>, Vec<(usize, usize)>) {
        let mut cond = Matrix::zeros(batch, self.width);
        let mut real = Vec::with_capacity(batch);
        let mut chosen = Vec::with_capacity(batch);
        for i in 0..batch {
            let s = rng.random_range(0..self.slots.len());
            let level = pick_weighted(&self.log_weights[s], rng);
            cond.set(i, self.slots[s].offset + level, 1.0);
            let pool = &self.rows[s][level];
            real.push(pool[rng.random_range(0..pool.len())]);
            chosen.push((s, level));
        }
        (cond, real, chosen)
    }
}

/// Regroups consecutive runs of `pac` rows into single rows. Row-major
/// storage makes this a reinterpretation of the buffer.
fn pack(m: &Matrix, pac: usize) -> Result<Matrix> {
    Matrix::from_vec(m.rows() / pac, m.cols() * pac, m.as_slice().to_vec())
}

fn latent(batch: usize, dim: usize, rng: &mut Rng) -> Matrix {
    let mut z = Matrix::zeros(batch, dim);
    for v in z.as_mut_slice() {
        *v = StandardNormal.sample(rng);
    }
    z
}

/// Cross-entropy of the generator's logits for each requested level, with
/// its gradient on the logits; both averaged over the batch.
fn condition_penalty(
    model: &CtganModel,
    logits: &Matrix,
    chosen: &[(usize, usize)],
) -> (f64, Matrix) {
    let n = logits.rows();
    let mut grad = Matrix::zeros(n, logits.cols());
    let mut loss = 0.0;
    for (i, &(s, level)) in chosen.iter().enumerate() {
        let span = model.layout.spans[model.conditions[s].column];
        let block = span.one_hot();
        let z = &logits.row(i)[block.clone()];
        let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = z.iter().map(|v| exp(v - top)).sum();
        loss += -(z[level] - top - ln(total));
        let g = &mut grad.row_mut(i)[block];
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = (exp(z[j] - top) / total - (j == level) as u8 as f64) / n as f64;
        }
    }
    (loss / n as f64, grad)
}

/// Trains the conditional generator on `train` (features plus label).
pub fn train_ctgan(train: &TabularDataset, cfg: &CtganConfig) -> Result<CtganModel> {
    cfg.validate()?;
    let n = train.row_count();
    if n == 0 {
        bail!(Domain, "cannot train on an empty dataset");
    }
    let mut columns = train.feature_schema();
    columns.push(train.label_column().clone());
    let levels: Vec<Option<usize>> = columns.iter().map(|c| c.kind.levels()).collect();

    let mut normalizers = Vec::with_capacity(columns.len());
    for (j, lv) in levels.iter().enumerate() {
        normalizers.push(match lv {
            Some(_) => None,
            None => Some(fit_normalizer(
                &train.features().column(j),
                cfg.max_modes,
                cfg.em_iters,
                derive_seed(cfg.seed, 100 + j as u64),
            )?),
        });
    }
    let layout = EncodedLayout::new(&levels, &normalizers)?;

    let wanted: Vec<usize> = match &cfg.condition_columns {
        None => (0..columns.len())
            .filter(|&j| levels[j].is_some())
            .collect(),
        Some(names) => names
            .iter()
            .map(|name| match columns.iter().position(|c| &c.name == name) {
                Some(j) if levels[j].is_some() => Ok(j),
                Some(_) => Err(crate::Error::Config(format!(
                    "condition column {name} is not discrete"
                ))),
                None => Err(crate::Error::Config(format!(
                    "unknown condition column {name}"
                ))),
            })
            .collect::<Result<_>>()?,
    };
    if wanted.is_empty() {
        bail!(Config, "no discrete column to condition on");
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| table_row(train, i)).collect();
    let mut conditions = Vec::new();
    let mut offset = 0;
    let mut pools = Vec::new();
    for &j in &wanted {
        let lv = levels[j].expect("discrete");
        let mut by_level = vec![Vec::new(); lv];
        for (i, r) in rows.iter().enumerate() {
            by_level[r[j] as usize].push(i);
        }
        let counts: Vec<u64> = by_level.iter().map(|v| v.len() as u64).collect();
        conditions.push(ConditionSlot {
            column: j,
            name: columns[j].name.clone(),
            offset,
            levels: lv,
            counts,
        });
        pools.push(by_level);
        offset += lv;
    }
    let condition_width = offset;

    let mut rng = rng_from_seed(cfg.seed);
    let encoded = Matrix::from_vec(
        n,
        layout.width,
        encode_rows(rows.iter(), &normalizers, &layout, Some(&mut rng))?,
    )?;
    let generator = MlpNetwork::new(
        NetworkRole::Generator,
        cfg.latent_dim + condition_width,
        &cfg.generator_hidden,
        Activation::Relu,
        layout.width,
        output_activation(&layout, cfg.gumbel_tau),
        &mut rng,
    )?;
    let discriminator = MlpNetwork::new(
        NetworkRole::Discriminator,
        cfg.pac * (layout.width + condition_width),
        &cfg.discriminator_hidden,
        Activation::LeakyRelu {
            slope: cfg.leaky_slope,
        },
        1,
        Activation::Identity,
        &mut rng,
    )?;
    let mut model = CtganModel {
        columns,
        normalizers,
        layout,
        conditions,
        condition_width,
        generator,
        discriminator,
        config: cfg.clone(),
        log: Vec::with_capacity(cfg.epochs),
    };
    let log_weights = model
        .conditions
        .iter()
        .map(|s| s.counts.iter().map(|&c| ln(1.0 + c as f64)).collect())
        .collect();
    let sampler = Sampler {
        slots: &model.conditions,
        rows: pools,
        log_weights,
        width: condition_width,
    };

    let mut adam_g = AdamState::for_network(&model.generator, cfg.learning_rate);
    let mut adam_d = AdamState::for_network(&model.discriminator, cfg.learning_rate);
    for st in [&mut adam_g, &mut adam_d] {
        st.beta1 = cfg.adam_beta1;
        st.beta2 = cfg.adam_beta2;
    }
    let steps = (n / cfg.batch_size).max(1);
    let b = cfg.batch_size;
    let pac = cfg.pac;
    let width = model.layout.width;
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut ema: Vec<Vec<f64>> = model
        .generator
        .parameters_mut()
        .iter()
        .map(|s| vec![0.0; s.len()])
        .collect();
    let mut ema_weight = 1.0;
    for epoch in 0..cfg.epochs {
        let (mut g_total, mut d_total) = (0.0, 0.0);
        for _ in 0..steps {
            let mut d_loss = 0.0;
            for _ in 0..cfg.discriminator_steps.max(1) {
                let (cond, real_idx, _) = sampler.draw(b, &mut rng);
                let z = latent(b, cfg.latent_dim, &mut rng);
                let noise = sample_gumbel(b, width, &mut rng);
                let fake = model.generator.forward(
                    &concat_cols(&z, &cond),
                    &ForwardOptions {
                        noise: Some(&noise),
                        hard: cfg.straight_through,
                    },
                )?;
                let real = encoded.select_rows(&real_idx);
                let d_in = pack(&concat_cols(&real, &cond), pac)?
                    .vstack(&pack(&concat_cols(fake.output(), &cond), pac)?)?;
                let d_trace = model
                    .discriminator
                    .forward(&d_in, &ForwardOptions::default())?;
                let groups = b / pac;
                let mut d_grad = Matrix::zeros(2 * groups, 1);
                d_loss = 0.0;
                for i in 0..2 * groups {
                    let target = if i < groups { cfg.real_label } else { 0.0 };
                    let logit = d_trace.output().get(i, 0);
                    d_loss += bce_with_logits(logit, target) / groups as f64;
                    d_grad.set(i, 0, (crate::math::sigmoid(logit) - target) / groups as f64);
                }
                if !d_loss.is_finite() {
                    bail!(
                        Numerical,
                        "discriminator loss is not finite in epoch {epoch}"
                    );
                }
                let (grads, _) = model.discriminator.backward(&d_trace, &d_grad, None)?;
                model.discriminator.apply_adam(&grads, &mut adam_d)?;
            }

            // generator step
            let (cond, _, chosen) = sampler.draw(b, &mut rng);
            let z = latent(b, cfg.latent_dim, &mut rng);
            let noise = sample_gumbel(b, width, &mut rng);
            let g_trace = model.generator.forward(
                &concat_cols(&z, &cond),
                &ForwardOptions {
                    noise: Some(&noise),
                    hard: cfg.straight_through,
                },
            )?;
            let d_trace = model.discriminator.forward(
                &pack(&concat_cols(g_trace.output(), &cond), pac)?,
                &ForwardOptions::default(),
            )?;
            let groups = b / pac;
            let mut out_grad = Matrix::zeros(groups, 1);
            let mut g_loss = 0.0;
            for i in 0..groups {
                let logit = d_trace.output().get(i, 0);
                g_loss += bce_with_logits(logit, 1.0) / groups as f64;
                out_grad.set(i, 0, (crate::math::sigmoid(logit) - 1.0) / groups as f64);
            }
            let (_, d_input_grad) = model.discriminator.backward(&d_trace, &out_grad, None)?;
            let unpacked =
                Matrix::from_vec(b, width + model.condition_width, d_input_grad.into_vec())?;
            let mut fake_grad = Matrix::zeros(b, width);
            for i in 0..b {
                fake_grad
                    .row_mut(i)
                    .copy_from_slice(&unpacked.row(i)[..width]);
            }
            let (penalty, logit_grad) = condition_penalty(&model, g_trace.logits(), &chosen);
            g_loss += penalty;
            let (grads, _) = model
                .generator
                .backward(&g_trace, &fake_grad, Some(&logit_grad))?;
            model.generator.apply_adam(&grads, &mut adam_g)?;
            if let Some(d) = cfg.generator_ema {
                for (avg, p) in ema.iter_mut().zip(model.generator.parameters_mut()) {
                    for (a, v) in avg.iter_mut().zip(p.iter()) {
                        *a = d * *a + (1.0 - d) * v;
                    }
                }
                ema_weight *= d;
            }

            d_total += d_loss;
            g_total += g_loss;
        }
        log.push(EpochLoss {
            epoch,
            generator: g_total / steps as f64,
            discriminator: d_total / steps as f64,
        });
    }
    if cfg.generator_ema.is_some() {
        let correction = 1.0 - ema_weight;
        for (p, avg) in model.generator.parameters_mut().into_iter().zip(&ema) {
            for (v, a) in p.iter_mut().zip(avg) {
                *v = a / correction;
            }
        }
    }
    model.log = log;
    Ok(model)
}

impl CtganModel {
    pub fn label_column(&self) -> usize {
        self.columns.len() - 1
    }

    fn slot(&self, column: &str) -> Result<usize> {
        match self.conditions.iter().position(|s| s.name == column) {
            Some(s) => Ok(s),
            None => bail!(Config, "{column} is not a condition column of this model"),
        }
    }

    /// Encoded generator output plus the condition vectors used.
    pub fn generate_encoded(
        &self,
        n: usize,
        condition: Option<(&str, u32)>,
        seed: u64,
    ) -> Result<Matrix> {
        let fixed = match condition {
            Some((name, level)) => {
                let s = self.slot(name)?;
                if level as usize >= self.conditions[s].levels {
                    bail!(
                        Config,
                        "level {level} out of range for condition column {name}"
                    );
                }
                Some((s, level as usize))
            }
            None => None,
        };
        let mut rng = rng_from_seed(seed);
        let mut out = Matrix::with_width(self.layout.width);
        let b = self.config.batch_size;
        let mut done = 0;
        while done < n {
            let m = b.min(n - done);
            let mut cond = Matrix::zeros(m, self.condition_width);
            for i in 0..m {
                let (s, level) = match fixed {
                    Some(f) => f,
                    None => {
                        let s = rng.random_range(0..self.conditions.len());
                        let w: Vec<f64> = self.conditions[s]
                            .counts
                            .iter()
                            .map(|&c| c as f64)
                            .collect();
                        (s, pick_weighted(&w, &mut rng))
                    }
                };
                cond.set(i, self.conditions[s].offset + level, 1.0);
            }
            let z = latent(m, self.config.latent_dim, &mut rng);
            let noise = sample_gumbel(m, self.layout.width, &mut rng);
            let t = self.generator.forward(
                &concat_cols(&z, &cond),
                &ForwardOptions {
                    noise: Some(&noise),
                    hard: true,
                },
            )?;
            for row in t.output().iter_rows() {
                out.push_row(row)?;
            }
            done += m;
        }
        Ok(out)
    }
}

/// Draws `n` decoded rows. When conditioned on the label column the emitted
/// labels are set to the requested class.
pub fn sample(
    model: &CtganModel,
    n: usize,
    condition: Option<(&str, u32)>,
    seed: u64,
) -> Result<SyntheticBatch> {
    let width = model.columns.len() - 1;
    let encoded = model.generate_encoded(n, condition, seed)?;
    let forced_label = match condition {
        Some((name, level)) if model.columns[model.label_column()].name == name => {
            Some(level as u8)
        }
        _ => None,
    };
    let mut batch = SyntheticBatch::empty(width);
    for row in encoded.iter_rows() {
        let mut decoded = decode_row(row, &model.normalizers, &model.layout)?;
        let label = decoded.pop().expect("label column") as u8;
        for (v, col) in decoded.iter_mut().zip(&model.columns) {
            if matches!(
                col.kind,
                FeatureKind::Binary | FeatureKind::Categorical { .. }
            ) {
                *v = crate::math::round(*v);
            }
        }
        batch.rows.push_row(&decoded)?;
        batch.labels.push(forced_label.unwrap_or(label));
        batch.provenance.push(Provenance {
            technique: Technique::Ctgan,
            base_index: None,
            neighbor_index: None,
            lambda: None,
            seed,
        });
    }
    Ok(batch)
}
