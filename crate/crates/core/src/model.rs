//! Day-level models: block-image CNN + LSTM fusion and the three baselines.
//!
//! The main model encodes each N-hour block with the continuous image
//! encoder and the discrete 1-D encoder, concatenates the two embeddings,
//! refines the block-embedding sequence with CBAM (channel attention over
//! embedding dims, position attention over blocks), runs a two-layer LSTM
//! over the blocks, appends a learnable subject embedding to the final
//! hidden state, and emits six classification heads with sizes
//! (2,2,2,3,2,2).
//!
//! Baselines share the heads: a two-layer LSTM over the 144x16 ten-minute
//! grid, the multi-kernel 1-D CNN over the same grid, and the image encoder
//! applied to one whole-day image.

use ndarray::{Array2, ArrayD, IxDyn};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Real, Tape, Var};
use crate::encoders::{
    stack_discrete, stack_images, ContinuousEncoder, ContinuousEncoderConfig, DiscreteEncoder,
    DiscreteEncoderConfig,
};
use crate::error::{Error, Result};
use crate::imaging::build_block_sequence;
use crate::nn::{zeros, Cbam2d, CbamSeq, Linear, LstmLayer, ParamStore};
use crate::types::{
    BlockConfig, DayFeatureGrid, HeadLogits, LabelVector, Encoding, HEAD_CLASSES, HEAD_NAMES,
    MINUTES_PER_DAY, N_CONTINUOUS, N_DISCRETE,
};

/// Sentinel subject id for inference on unseen participants; the subject
/// embedding contribution is a zero vector.
pub const UNKNOWN_SUBJECT: usize = usize::MAX;

/// Where CBAM is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CbamPlacement {
    /// On the B x D block-embedding sequence (default).
    BlockSequence,
    /// On the continuous encoder's pre-pool feature map.
    EncoderMap,
    /// Disabled.
    None,
}

/// Model hyperparameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    /// 0 disables the subject embedding.
    pub subject_embed_dim: usize,
    pub n_subjects: usize,
    pub cbam_reduction: usize,
    pub dropout: f64,
    pub cbam_placement: CbamPlacement,
    /// Route discrete rows through the 1-D branch (true) or leave them to
    /// the image (the "without discrete branch" ablation pairs false with
    /// `BlockConfig.discrete_in_image`).
    pub use_discrete_branch: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            lstm_hidden: 256,
            lstm_layers: 2,
            subject_embed_dim: 16,
            n_subjects: 0,
            cbam_reduction: 8,
            dropout: 0.3,
            cbam_placement: CbamPlacement::BlockSequence,
            use_discrete_branch: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lstm_layers == 0 {
            return Err(Error::Config("lstm_layers must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Which model to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    MisLstm,
    LstmBaseline,
    Cnn1dBaseline,
    Cnn2dBaseline,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mis_lstm" => Ok(ModelKind::MisLstm),
            "lstm" => Ok(ModelKind::LstmBaseline),
            "cnn1d" => Ok(ModelKind::Cnn1dBaseline),
            "cnn2d" => Ok(ModelKind::Cnn2dBaseline),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::MisLstm => "mis_lstm",
            ModelKind::LstmBaseline => "lstm",
            ModelKind::Cnn1dBaseline => "cnn1d",
            ModelKind::Cnn2dBaseline => "cnn2d",
        })
    }
}

enum Backbone {
    Mis {
        continuous: ContinuousEncoder,
        discrete: Option<DiscreteEncoder>,
        cbam_seq: Option<CbamSeq>,
        cbam_map: Option<Cbam2d>,
        lstm: Vec<LstmLayer>,
        subject_embed: Option<usize>,
    },
    Lstm {
        lstm: Vec<LstmLayer>,
    },
    Cnn1d {
        encoder: DiscreteEncoder,
    },
    Cnn2d {
        encoder: ContinuousEncoder,
    },
}

/// A built model: parameter store plus the architecture wiring.
pub struct DayModel<T: Real> {
    pub store: ParamStore<T>,
    backbone: Backbone,
    heads: Vec<Linear>,
    pub kind: ModelKind,
    pub model_config: ModelConfig,
    pub block_config: BlockConfig,
    pub encoder_config: ContinuousEncoderConfig,
    pub discrete_config: DiscreteEncoderConfig,
}

/// Per-day forward output: one logit `Var` per head, in head order.
pub struct DayOutput {
    pub heads: Vec<Var>,
}

impl DayOutput {
    /// Materialize logits from the tape.
    pub fn logits<T: Real>(&self, tape: &Tape<T>) -> HeadLogits {
        let mut flat = Vec::with_capacity(crate::types::TOTAL_LOGITS);
        for &head in &self.heads {
            let v = tape.value(head);
            for i in 0..v.shape()[1] {
                flat.push(v[[0, i]].to_f64() as f32);
            }
        }
        HeadLogits::from_flat(&flat).expect("head shapes are fixed")
    }
}

/// Per-head argmax with low-index tie-break.
pub fn predict(logits: &HeadLogits) -> LabelVector {
    LabelVector::from_classes(logits.argmax_classes()).expect("argmax is in range")
}

impl<T: Real> DayModel<T> {
    /// Build a model with seeded initialization.
    pub fn new(
        kind: ModelKind,
        model_config: ModelConfig,
        block_config: BlockConfig,
        mut encoder_config: ContinuousEncoderConfig,
        discrete_config: DiscreteEncoderConfig,
        seed: u64,
    ) -> Result<Self> {
        model_config.validate()?;
        block_config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6f64656c);
        let mut store = ParamStore::new();

        // image channel count follows the encoding and discrete routing
        encoder_config.input_channels = match block_config.encoding {
            Encoding::MultiChannel => block_config.image_channels(),
            Encoding::StackedVertical => 1,
        };

        let backbone = match kind {
            ModelKind::MisLstm => {
                let continuous =
                    ContinuousEncoder::new(&mut store, &mut rng, "cont", encoder_config.clone())?;
                let discrete = model_config
                    .use_discrete_branch
                    .then(|| {
                        DiscreteEncoder::new(&mut store, &mut rng, "disc", discrete_config.clone())
                    })
                    .transpose()?;
                let dim = encoder_config.embed_dim
                    + discrete.as_ref().map_or(0, |d| d.config.embed_dim());
                let cbam_seq = (model_config.cbam_placement == CbamPlacement::BlockSequence)
                    .then(|| {
                        CbamSeq::new(&mut store, &mut rng, "cbam", dim, model_config.cbam_reduction)
                    });
                let cbam_map = (model_config.cbam_placement == CbamPlacement::EncoderMap)
                    .then(|| {
                        let channels = encoder_config.stages.last().unwrap().0;
                        Cbam2d::new(&mut store, &mut rng, "cbam2d", channels, model_config.cbam_reduction)
                    });
                let mut lstm = Vec::with_capacity(model_config.lstm_layers);
                let mut in_dim = dim;
                for layer in 0..model_config.lstm_layers {
                    lstm.push(LstmLayer::new(
                        &mut store,
                        &mut rng,
                        &format!("lstm{layer}"),
                        in_dim,
                        model_config.lstm_hidden,
                    ));
                    in_dim = model_config.lstm_hidden;
                }
                let subject_embed = (model_config.subject_embed_dim > 0).then(|| {
                    store.add(
                        "subject_embed",
                        crate::nn::randn::<T>(
                            &mut rng,
                            &[model_config.n_subjects.max(1), model_config.subject_embed_dim],
                            0.1,
                        ),
                    )
                });
                Backbone::Mis {
                    continuous,
                    discrete,
                    cbam_seq,
                    cbam_map,
                    lstm,
                    subject_embed,
                }
            }
            ModelKind::LstmBaseline => {
                let mut lstm = Vec::with_capacity(model_config.lstm_layers);
                let mut in_dim = N_CONTINUOUS + N_DISCRETE;
                for layer in 0..model_config.lstm_layers {
                    lstm.push(LstmLayer::new(
                        &mut store,
                        &mut rng,
                        &format!("lstm{layer}"),
                        in_dim,
                        model_config.lstm_hidden,
                    ));
                    in_dim = model_config.lstm_hidden;
                }
                Backbone::Lstm { lstm }
            }
            ModelKind::Cnn1dBaseline => {
                let config = DiscreteEncoderConfig {
                    input_rows: N_CONTINUOUS + N_DISCRETE,
                    ..discrete_config.clone()
                };
                Backbone::Cnn1d {
                    encoder: DiscreteEncoder::new(&mut store, &mut rng, "cnn1d", config)?,
                }
            }
            ModelKind::Cnn2dBaseline => {
                let config = ContinuousEncoderConfig {
                    input_channels: match block_config.encoding {
                        Encoding::MultiChannel => N_CONTINUOUS,
                        Encoding::StackedVertical => 1,
                    },
                    ..encoder_config.clone()
                };
                Backbone::Cnn2d {
                    encoder: ContinuousEncoder::new(&mut store, &mut rng, "cnn2d", config)?,
                }
            }
        };

        let head_in = match &backbone {
            Backbone::Mis { discrete, .. } => {
                let _ = discrete;
                model_config.lstm_hidden + model_config.subject_embed_dim
            }
            Backbone::Lstm { .. } => model_config.lstm_hidden,
            Backbone::Cnn1d { encoder } => encoder.config.embed_dim(),
            Backbone::Cnn2d { .. } => encoder_config.embed_dim,
        };
        let heads = HEAD_NAMES
            .iter()
            .zip(HEAD_CLASSES.iter())
            .map(|(name, &classes)| {
                Linear::new(&mut store, &mut rng, &format!("head.{name}"), head_in, classes)
            })
            .collect();

        Ok(DayModel {
            store,
            backbone,
            heads,
            kind,
            model_config,
            block_config,
            encoder_config,
            discrete_config,
        })
    }

    /// Convert to another element precision (used by the gradient check).
    pub fn convert<U: Real>(&self) -> DayModel<U> {
        let mut twin = DayModel::<U>::new(
            self.kind,
            self.model_config.clone(),
            self.block_config,
            self.encoder_config.clone(),
            self.discrete_config.clone(),
            0,
        )
        .expect("same config rebuilds");
        twin.store = self.store.convert::<U>();
        twin
    }

    /// Forward one day. `dropout_rng` enables dropout (training mode).
    pub fn forward_day(
        &self,
        tape: &mut Tape<T>,
        vars: &[Var],
        grid: &DayFeatureGrid,
        subject: usize,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<DayOutput> {
        let features = match &self.backbone {
            Backbone::Mis {
                continuous,
                discrete,
                cbam_seq,
                cbam_map,
                lstm,
                subject_embed,
            } => {
                if subject != UNKNOWN_SUBJECT && subject >= self.model_config.n_subjects {
                    return Err(Error::Data(format!(
                        "subject id {subject} outside 0..{}",
                        self.model_config.n_subjects
                    )));
                }
                let sequence = build_block_sequence(grid, &self.block_config)?;
                let blocks = sequence.len();
                let images = tape.constant(stack_images::<T>(&sequence.images).into_dyn());
                let (cont_emb, _map) =
                    continuous.forward(tape, vars, images, cbam_map.as_ref())?;
                let mut embedding = cont_emb; // [B, E_c]
                if let Some(discrete_enc) = discrete {
                    let slices =
                        tape.constant(stack_discrete::<T>(&sequence.discrete_blocks).into_dyn());
                    let disc_emb = discrete_enc.forward(tape, vars, slices)?;
                    embedding = tape.concat(1, &[embedding, disc_emb]); // [B, D]
                }
                let refined = match cbam_seq {
                    Some(cbam) => cbam.forward(tape, vars, embedding),
                    None => embedding,
                };
                // LSTM over blocks in temporal order
                let steps: Vec<Var> = (0..blocks).map(|b| tape.narrow(refined, 0, b, 1)).collect();
                let mut seq = steps;
                for layer in lstm {
                    seq = layer.forward_seq(tape, vars, &seq);
                }
                let mut final_state = *seq.last().expect("at least one block");
                if let Some(embed_slot) = subject_embed {
                    let subject_vec = if subject == UNKNOWN_SUBJECT {
                        tape.constant(zeros::<T>(&[1, self.model_config.subject_embed_dim]))
                    } else {
                        tape.narrow(vars[*embed_slot], 0, subject, 1)
                    };
                    final_state = tape.concat(1, &[final_state, subject_vec]);
                }
                final_state
            }
            Backbone::Lstm { lstm } => {
                let grid16 = ten_minute_grid::<T>(grid);
                let steps: Vec<Var> = (0..crate::types::WINDOWS_PER_DAY)
                    .map(|w| {
                        tape.constant(
                            grid16
                                .column(w)
                                .to_owned()
                                .into_shape_with_order((1, N_CONTINUOUS + N_DISCRETE))
                                .unwrap()
                                .into_dyn(),
                        )
                    })
                    .collect();
                let mut seq = steps;
                for layer in lstm {
                    seq = layer.forward_seq(tape, vars, &seq);
                }
                *seq.last().unwrap()
            }
            Backbone::Cnn1d { encoder } => {
                let grid16 = ten_minute_grid::<T>(grid);
                let (rows, cols) = grid16.dim();
                let input = tape.constant(
                    grid16
                        .into_shape_with_order((1, rows, cols))
                        .unwrap()
                        .into_dyn(),
                );
                encoder.forward(tape, vars, input)?
            }
            Backbone::Cnn2d { encoder } => {
                let full_day = BlockConfig {
                    n_hours: 24,
                    discrete_in_image: false,
                    ..self.block_config
                };
                let sequence = build_block_sequence(grid, &full_day)?;
                let images = tape.constant(stack_images::<T>(&sequence.images).into_dyn());
                let (emb, _) = encoder.forward(tape, vars, images, None)?;
                emb
            }
        };

        let features = match dropout_rng {
            Some(rng) if self.model_config.dropout > 0.0 => {
                let keep = 1.0 - self.model_config.dropout;
                let shape = tape.value(features).shape().to_vec();
                let mask = ArrayD::from_shape_fn(IxDyn(&shape), |_| {
                    if rng.gen::<f64>() < keep {
                        T::from_f64(1.0 / keep)
                    } else {
                        T::zero()
                    }
                });
                tape.mul_mask(features, mask)
            }
            _ => features,
        };

        let heads = self
            .heads
            .iter()
            .map(|head| head.forward(tape, vars, features))
            .collect();
        Ok(DayOutput { heads })
    }

    /// Inference helper: forward without dropout, return plain logits.
    pub fn infer_day(&self, grid: &DayFeatureGrid, subject: usize) -> Result<HeadLogits> {
        let mut tape = Tape::new();
        let vars = self.store.bind_all(&mut tape);
        let out = self.forward_day(&mut tape, &vars, grid, subject, None)?;
        Ok(out.logits(&tape))
    }
}

/// Resample the day grid to the unified 16 x 144 ten-minute matrix:
/// continuous rows averaged per window, discrete rows as aggregated.
pub fn ten_minute_grid<T: Real>(grid: &DayFeatureGrid) -> Array2<T> {
    let windows = crate::types::WINDOWS_PER_DAY;
    let mut out = Array2::<T>::zeros((N_CONTINUOUS + N_DISCRETE, windows));
    let per = MINUTES_PER_DAY / windows;
    for row in 0..N_CONTINUOUS {
        for w in 0..windows {
            let mut sum = 0.0f64;
            for t in 0..per {
                sum += grid.continuous[[row, w * per + t]] as f64;
            }
            out[[row, w]] = T::from_f64(sum / per as f64);
        }
    }
    for row in 0..N_DISCRETE {
        for w in 0..windows {
            out[[N_CONTINUOUS + row, w]] = T::from_f64(grid.discrete[[row, w]] as f64);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn random_grid(seed: u64) -> DayFeatureGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DayFeatureGrid {
            continuous: Array2::from_shape_fn((N_CONTINUOUS, MINUTES_PER_DAY), |_| {
                rng.gen_range(-2.0f32..2.0)
            }),
            discrete: Array2::from_shape_fn((N_DISCRETE, crate::types::WINDOWS_PER_DAY), |_| {
                rng.gen_range(0.0f32..1.0)
            }),
            observed_mask: Array2::from_elem((N_CONTINUOUS, MINUTES_PER_DAY), true),
        }
    }

    fn build(
        kind: ModelKind,
        block: BlockConfig,
        model: ModelConfig,
    ) -> DayModel<f32> {
        DayModel::new(
            kind,
            model,
            block,
            ContinuousEncoderConfig::default(),
            DiscreteEncoderConfig::default(),
            42,
        )
        .unwrap()
    }

    #[test]
    fn head_sizes_for_all_block_lengths_and_encodings() {
        let grid = random_grid(1);
        for n_hours in [2usize, 4, 6] {
            for encoding in [Encoding::MultiChannel, Encoding::StackedVertical] {
                let block = BlockConfig {
                    n_hours,
                    encoding,
                    ..BlockConfig::default()
                };
                let model = build(
                    ModelKind::MisLstm,
                    block,
                    ModelConfig {
                        n_subjects: 3,
                        ..ModelConfig::default()
                    },
                );
                let logits = model.infer_day(&grid, 0).unwrap();
                logits.validate().unwrap();
                let lens: Vec<usize> = logits.heads().iter().map(|h| h.len()).collect();
                assert_eq!(lens, vec![2, 2, 2, 3, 2, 2], "N={n_hours} {encoding}");
            }
        }
    }

    #[test]
    fn unknown_subject_uses_zero_embedding() {
        let grid = random_grid(2);
        let model = build(
            ModelKind::MisLstm,
            BlockConfig::default(),
            ModelConfig {
                n_subjects: 2,
                ..ModelConfig::default()
            },
        );
        let known = model.infer_day(&grid, 0).unwrap();
        let unknown = model.infer_day(&grid, UNKNOWN_SUBJECT).unwrap();
        assert_ne!(known.to_flat(), unknown.to_flat());
        // invalid explicit ids are rejected
        assert!(model.infer_day(&grid, 7).is_err());

        // with the embedding disabled, subject identity cannot matter
        let no_embed = build(
            ModelKind::MisLstm,
            BlockConfig::default(),
            ModelConfig {
                n_subjects: 2,
                subject_embed_dim: 0,
                ..ModelConfig::default()
            },
        );
        let a = no_embed.infer_day(&grid, 0).unwrap();
        let b = no_embed.infer_day(&grid, UNKNOWN_SUBJECT).unwrap();
        assert_eq!(a.to_flat(), b.to_flat());
    }

    #[test]
    fn block_order_matters_for_the_lstm() {
        // permuting block order must change logits in general
        let grid = random_grid(3);
        let mut swapped = grid.clone();
        // swap first and last 4-hour blocks in both grids
        for row in 0..N_CONTINUOUS {
            for t in 0..240 {
                let a = grid.continuous[[row, t]];
                let b = grid.continuous[[row, 1200 + t]];
                swapped.continuous[[row, t]] = b;
                swapped.continuous[[row, 1200 + t]] = a;
            }
        }
        for row in 0..N_DISCRETE {
            for w in 0..24 {
                let a = grid.discrete[[row, w]];
                let b = grid.discrete[[row, 120 + w]];
                swapped.discrete[[row, w]] = b;
                swapped.discrete[[row, 120 + w]] = a;
            }
        }
        let model = build(
            ModelKind::MisLstm,
            BlockConfig::default(),
            ModelConfig {
                n_subjects: 1,
                ..ModelConfig::default()
            },
        );
        let base = model.infer_day(&grid, 0).unwrap();
        let perm = model.infer_day(&swapped, 0).unwrap();
        assert_ne!(base.to_flat(), perm.to_flat());
    }

    #[test]
    fn forward_is_deterministic() {
        let grid = random_grid(4);
        let model = build(
            ModelKind::MisLstm,
            BlockConfig::default(),
            ModelConfig {
                n_subjects: 1,
                ..ModelConfig::default()
            },
        );
        let a = model.infer_day(&grid, 0).unwrap();
        let b = model.infer_day(&grid, 0).unwrap();
        assert_eq!(a.to_flat(), b.to_flat());
    }

    #[test]
    fn cbam_placements_and_disabled_variant_run() {
        let grid = random_grid(5);
        for placement in [
            CbamPlacement::BlockSequence,
            CbamPlacement::EncoderMap,
            CbamPlacement::None,
        ] {
            let model = build(
                ModelKind::MisLstm,
                BlockConfig::default(),
                ModelConfig {
                    n_subjects: 1,
                    cbam_placement: placement,
                    ..ModelConfig::default()
                },
            );
            let logits = model.infer_day(&grid, 0).unwrap();
            logits.validate().unwrap();
        }
    }

    #[test]
    fn no_discrete_variant_embeds_rows_in_image() {
        let grid = random_grid(6);
        let block = BlockConfig {
            discrete_in_image: true,
            ..BlockConfig::default()
        };
        let model = build(
            ModelKind::MisLstm,
            block,
            ModelConfig {
                n_subjects: 1,
                use_discrete_branch: false,
                ..ModelConfig::default()
            },
        );
        assert_eq!(model.encoder_config.input_channels, 16);
        let logits = model.infer_day(&grid, 0).unwrap();
        logits.validate().unwrap();
    }

    #[test]
    fn baselines_emit_valid_heads() {
        let grid = random_grid(7);
        for kind in [
            ModelKind::LstmBaseline,
            ModelKind::Cnn1dBaseline,
            ModelKind::Cnn2dBaseline,
        ] {
            let model = build(
                kind,
                BlockConfig::default(),
                ModelConfig {
                    n_subjects: 1,
                    ..ModelConfig::default()
                },
            );
            let logits = model.infer_day(&grid, 0).unwrap();
            logits.validate().unwrap();
        }
    }

    #[test]
    fn predict_uses_low_index_tie_break() {
        let logits = HeadLogits::from_flat(&[
            0.1, 0.9, // -> 1
            0.5, 0.5, // tie -> 0
            1.0, -1.0, // -> 0
            0.1, 0.9, 0.3, // -> 1
            0.3, 0.3, // tie -> 0
            0.0, 2.0, // -> 1
        ])
        .unwrap();
        let label = predict(&logits);
        assert_eq!(label, LabelVector::new(1, 0, 0, 1, 0, 1).unwrap());
    }

    #[test]
    fn ten_minute_grid_averages_continuous_rows() {
        let mut grid = random_grid(8);
        for t in 0..MINUTES_PER_DAY {
            grid.continuous[[0, t]] = if t < 10 { 2.0 } else { 0.0 };
        }
        let g = ten_minute_grid::<f64>(&grid);
        assert_eq!(g.dim(), (16, 144));
        assert!((g[[0, 0]] - 2.0).abs() < 1e-9);
        assert!(g[[0, 1]].abs() < 1e-9);
    }
}
