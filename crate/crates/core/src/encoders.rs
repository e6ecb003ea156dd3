//! Modality-specific block encoders.
//!
//! Continuous block images go through a small residual squeeze-excitation
//! CNN: a strided 7x7 stem, a configurable stage list, global average
//! pooling, and a linear projection. Discrete block slices go through a
//! bank of 1-D convolutions (one kernel size each, filters spanning all
//! nine rows) with max-over-time pooling and concatenation.

use ndarray::{Array3, Array4};
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Real, Tape, Var};
use crate::error::{Error, Result};
use crate::nn::{he_normal, zeros, Cbam2d, Conv2dLayer, GroupNormLayer, Linear, ParamStore, ResidualBlock};

/// Continuous-branch settings.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ContinuousEncoderConfig {
    /// Image channels: 7 (multi-channel), 1 (stacked-vertical), or 16 when
    /// discrete rows are routed into the image.
    pub input_channels: usize,
    /// (width, stride) per residual stage; the stem outputs stages[0].0.
    pub stages: Vec<(usize, usize)>,
    pub use_squeeze_excitation: bool,
    /// Output embedding dimension.
    pub embed_dim: usize,
}

impl Default for ContinuousEncoderConfig {
    fn default() -> Self {
        ContinuousEncoderConfig {
            input_channels: 7,
            stages: vec![(32, 2), (64, 2), (128, 2), (256, 2)],
            use_squeeze_excitation: true,
            embed_dim: 256,
        }
    }
}

impl ContinuousEncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim < 8 {
            return Err(Error::Config("embed_dim must be >= 8".into()));
        }
        if self.stages.is_empty() {
            return Err(Error::Config("at least one stage required".into()));
        }
        if self.stages.iter().any(|&(w, s)| w == 0 || s == 0) {
            return Err(Error::Config("stage widths and strides must be positive".into()));
        }
        Ok(())
    }
}

/// Residual SE image encoder.
pub struct ContinuousEncoder {
    stem: Conv2dLayer,
    stem_gn: GroupNormLayer,
    blocks: Vec<ResidualBlock>,
    proj: Linear,
    pub config: ContinuousEncoderConfig,
}

impl ContinuousEncoder {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        config: ContinuousEncoderConfig,
    ) -> Result<Self> {
        config.validate()?;
        let stem_width = config.stages[0].0;
        let stem = Conv2dLayer::new(
            store,
            rng,
            &format!("{name}.stem"),
            config.input_channels,
            stem_width,
            (7, 7),
            (4, 4),
            (3, 3),
        );
        let stem_gn = GroupNormLayer::new(store, &format!("{name}.stem_gn"), stem_width);
        let mut blocks = Vec::with_capacity(config.stages.len());
        let mut in_ch = stem_width;
        for (i, &(width, stride)) in config.stages.iter().enumerate() {
            blocks.push(ResidualBlock::new(
                store,
                rng,
                &format!("{name}.stage{i}"),
                in_ch,
                width,
                stride,
                config.use_squeeze_excitation,
            ));
            in_ch = width;
        }
        let proj = Linear::new(store, rng, &format!("{name}.proj"), in_ch, config.embed_dim);
        Ok(ContinuousEncoder {
            stem,
            stem_gn,
            blocks,
            proj,
            config,
        })
    }

    /// Encode a batch of block images `[B,C,H,W]`. Returns the pooled
    /// embedding `[B, embed_dim]` and the pre-pool feature map. When a
    /// 2-D CBAM is supplied it refines the map before pooling.
    pub fn forward<T: Real>(
        &self,
        tape: &mut Tape<T>,
        vars: &[Var],
        images: Var,
        cbam: Option<&Cbam2d>,
    ) -> Result<(Var, Var)> {
        let channels = tape.value(images).shape()[1];
        if channels != self.config.input_channels {
            return Err(Error::Shape(format!(
                "encoder expects {} image channels, got {channels}",
                self.config.input_channels
            )));
        }
        let mut y = self.stem.forward(tape, vars, images);
        y = self.stem_gn.forward(tape, vars, y);
        y = tape.relu(y);
        for block in &self.blocks {
            y = block.forward(tape, vars, y);
        }
        let map = match cbam {
            Some(cbam) => cbam.forward(tape, vars, y),
            None => y,
        };
        let pooled = tape.global_avg_pool(map);
        let embedding = self.proj.forward(tape, vars, pooled);
        Ok((embedding, map))
    }
}

/// Discrete-branch settings.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DiscreteEncoderConfig {
    pub kernel_sizes: Vec<usize>,
    pub filters_per_size: usize,
    /// Rows of the input block matrix.
    pub input_rows: usize,
}

impl Default for DiscreteEncoderConfig {
    fn default() -> Self {
        DiscreteEncoderConfig {
            kernel_sizes: vec![3, 4, 5, 6],
            filters_per_size: 16,
            input_rows: crate::types::N_DISCRETE,
        }
    }
}

impl DiscreteEncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_sizes.is_empty() || self.filters_per_size == 0 {
            return Err(Error::Config("kernel sizes and filter count must be non-empty".into()));
        }
        Ok(())
    }

    /// Output embedding length.
    pub fn embed_dim(&self) -> usize {
        self.kernel_sizes.len() * self.filters_per_size
    }
}

/// Multi-kernel 1-D convolution encoder with max-over-time pooling.
pub struct DiscreteEncoder {
    convs: Vec<(usize, usize, usize)>, // (weight slot, bias slot, kernel)
    pub config: DiscreteEncoderConfig,
}

impl DiscreteEncoder {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        config: DiscreteEncoderConfig,
    ) -> Result<Self> {
        config.validate()?;
        let convs = config
            .kernel_sizes
            .iter()
            .map(|&k| {
                let w = store.add(
                    format!("{name}.k{k}.w"),
                    he_normal::<T>(
                        rng,
                        &[config.filters_per_size, config.input_rows, k],
                        config.input_rows * k,
                    ),
                );
                let b = store.add(format!("{name}.k{k}.b"), zeros::<T>(&[config.filters_per_size]));
                (w, b, k)
            })
            .collect();
        Ok(DiscreteEncoder {
            convs,
            config: config.clone(),
        })
    }

    /// Encode `[B, rows, L]` block slices into `[B, embed_dim]`.
    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, vars: &[Var], blocks: Var) -> Result<Var> {
        let len = tape.value(blocks).shape()[2];
        let max_kernel = *self.config.kernel_sizes.iter().max().unwrap();
        if len < max_kernel {
            return Err(Error::Config(format!(
                "block length {len} shorter than kernel {max_kernel}"
            )));
        }
        let mut pooled = Vec::with_capacity(self.convs.len());
        for &(w, b, _) in &self.convs {
            let conv = tape.conv1d(blocks, vars[w], Some(vars[b]), 0);
            pooled.push(tape.max_over_time(conv));
        }
        Ok(tape.concat(1, &pooled))
    }
}

/// Pack block images into one `[B,C,H,W]` batch tensor.
pub fn stack_images<T: Real>(images: &[crate::imaging::BlockImage]) -> Array4<T> {
    let (c, h, w) = images[0].shape();
    let mut out = Array4::<T>::zeros((images.len(), c, h, w));
    for (b, image) in images.iter().enumerate() {
        let mut dst = out.index_axis_mut(ndarray::Axis(0), b);
        ndarray::Zip::from(&mut dst)
            .and(&image.data)
            .for_each(|d, &v| *d = T::from_f64(v as f64));
    }
    out
}

/// Pack discrete block slices into one `[B, rows, L]` batch tensor.
pub fn stack_discrete<T: Real>(blocks: &[ndarray::Array2<f32>]) -> Array3<T> {
    let (rows, len) = blocks[0].dim();
    let mut out = Array3::<T>::zeros((blocks.len(), rows, len));
    for (b, block) in blocks.iter().enumerate() {
        let mut dst = out.index_axis_mut(ndarray::Axis(0), b);
        ndarray::Zip::from(&mut dst)
            .and(block)
            .for_each(|d, &v| *d = T::from_f64(v as f64));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::conv_out;
    use ndarray::{ArrayD, IxDyn};
    use rand::Rng;
    use rand::SeedableRng;

    fn encoder_fixture() -> (ParamStore<f64>, ContinuousEncoder) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let enc = ContinuousEncoder::new(
            &mut store,
            &mut rng,
            "enc",
            ContinuousEncoderConfig::default(),
        )
        .unwrap();
        (store, enc)
    }

    #[test]
    fn default_continuous_encoder_outputs_256() {
        let (store, enc) = encoder_fixture();
        let mut tape = Tape::<f64>::new();
        let vars = store.bind_all(&mut tape);
        let images = tape.constant(ArrayD::zeros(IxDyn(&[6, 7, 64, 240])));
        let (emb, map) = enc.forward(&mut tape, &vars, images, None).unwrap();
        assert_eq!(tape.value(emb).shape(), &[6, 256]);
        assert_eq!(tape.value(map).shape().len(), 4);
    }

    #[test]
    fn zero_images_give_identical_embeddings() {
        let (store, enc) = encoder_fixture();
        let mut tape = Tape::<f64>::new();
        let vars = store.bind_all(&mut tape);
        let images = tape.constant(ArrayD::zeros(IxDyn(&[2, 7, 64, 240])));
        let (emb, _) = enc.forward(&mut tape, &vars, images, None).unwrap();
        let value = tape.value(emb);
        for d in 0..256 {
            assert_eq!(value[[0, d]], value[[1, d]]);
        }
    }

    #[test]
    fn wider_images_still_project_to_embed_dim() {
        let (store, enc) = encoder_fixture();
        let mut tape = Tape::<f64>::new();
        let vars = store.bind_all(&mut tape);
        let images = tape.constant(ArrayD::zeros(IxDyn(&[1, 7, 64, 480])));
        let (emb, _) = enc.forward(&mut tape, &vars, images, None).unwrap();
        assert_eq!(tape.value(emb).shape(), &[1, 256]);
    }

    #[test]
    fn channel_mismatch_is_a_shape_error() {
        let (store, enc) = encoder_fixture();
        let mut tape = Tape::<f64>::new();
        let vars = store.bind_all(&mut tape);
        let images = tape.constant(ArrayD::zeros(IxDyn(&[1, 3, 64, 240])));
        assert!(enc.forward(&mut tape, &vars, images, None).is_err());
    }

    #[test]
    fn default_encoder_stays_under_five_million_parameters() {
        let (store, _) = encoder_fixture();
        assert!(
            store.param_count() < 5_000_000,
            "encoder has {} parameters",
            store.param_count()
        );
    }

    #[test]
    fn discrete_embedding_is_sixty_four_wide() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::<f64>::new();
        let enc =
            DiscreteEncoder::new(&mut store, &mut rng, "disc", DiscreteEncoderConfig::default())
                .unwrap();
        assert_eq!(enc.config.embed_dim(), 64);
        let mut tape = Tape::new();
        let vars = store.bind_all(&mut tape);
        let blocks = tape.constant(ArrayD::zeros(IxDyn(&[6, 9, 24])));
        let emb = enc.forward(&mut tape, &vars, blocks).unwrap();
        assert_eq!(tape.value(emb).shape(), &[6, 64]);
    }

    #[test]
    fn block_shorter_than_kernel_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::<f64>::new();
        let enc =
            DiscreteEncoder::new(&mut store, &mut rng, "disc", DiscreteEncoderConfig::default())
                .unwrap();
        let mut tape = Tape::new();
        let vars = store.bind_all(&mut tape);
        let blocks = tape.constant(ArrayD::zeros(IxDyn(&[1, 9, 5])));
        assert!(enc.forward(&mut tape, &vars, blocks).is_err());
    }

    /// Direct sliding-window evaluation of the multi-kernel 1-D encoder.
    fn brute_force_discrete(
        store: &ParamStore<f64>,
        enc: &DiscreteEncoder,
        input: &ndarray::Array3<f64>,
    ) -> ndarray::Array2<f64> {
        let (batch, rows, len) = input.dim();
        let f = enc.config.filters_per_size;
        let mut out = ndarray::Array2::<f64>::zeros((batch, enc.config.embed_dim()));
        for b in 0..batch {
            for (ki, &(wslot, bslot, k)) in enc.convs.iter().enumerate() {
                let w = store.tensor(wslot);
                let bias = store.tensor(bslot);
                for o in 0..f {
                    let mut best = f64::NEG_INFINITY;
                    for start in 0..=(len - k) {
                        let mut acc = bias[[o]];
                        for r in 0..rows {
                            for j in 0..k {
                                acc += w[[o, r, j]] * input[[b, r, start + j]];
                            }
                        }
                        best = best.max(acc);
                    }
                    out[[b, ki * f + o]] = best;
                }
            }
        }
        out
    }

    #[test]
    fn discrete_encoder_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::<f64>::new();
        let enc =
            DiscreteEncoder::new(&mut store, &mut rng, "disc", DiscreteEncoderConfig::default())
                .unwrap();
        for trial in 0..10 {
            let len = 12 + trial;
            let input =
                ndarray::Array3::from_shape_fn((3, 9, len), |_| rng.gen_range(-2.0..2.0));
            let mut tape = Tape::new();
            let vars = store.bind_all(&mut tape);
            let blocks = tape.constant(input.clone().into_dyn());
            let emb = enc.forward(&mut tape, &vars, blocks).unwrap();
            let brute = brute_force_discrete(&store, &enc, &input);
            for (a, b) in tape.value(emb).iter().zip(brute.iter()) {
                assert!((a - b).abs() < 1e-5, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn embedding_norms_finite_for_degenerate_inputs() {
        let (store, enc) = encoder_fixture();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for value in [0.0f64, 1.0] {
            let mut tape = Tape::<f64>::new();
            let vars = store.bind_all(&mut tape);
            let images = tape.constant(ArrayD::from_elem(IxDyn(&[1, 7, 64, 120]), value));
            let (emb, _) = enc.forward(&mut tape, &vars, images, None).unwrap();
            assert!(tape.value(emb).iter().all(|v| v.is_finite()));
        }
        let mut tape = Tape::<f64>::new();
        let vars = store.bind_all(&mut tape);
        let random = crate::nn::randn::<f64>(&mut rng, &[1, 7, 64, 120], 1.0);
        let images = tape.constant(random);
        let (emb, _) = enc.forward(&mut tape, &vars, images, None).unwrap();
        assert!(tape.value(emb).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn conv_out_shapes_for_default_stack() {
        // stem /4 then four /2 stages on a 64x240 block
        let mut h = conv_out(64, 7, 4, 3);
        let mut w = conv_out(240, 7, 4, 3);
        for _ in 0..4 {
            h = conv_out(h, 3, 2, 1);
            w = conv_out(w, 3, 2, 1);
        }
        assert_eq!((h, w), (1, 4));
    }
}
