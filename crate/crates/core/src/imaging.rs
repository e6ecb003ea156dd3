//! N-hour block segmentation and block-image rasterization.
//!
//! A day grid is cut into 24/N non-overlapping blocks. Each block's
//! continuous slice becomes a binary image: for channel k at minute t the
//! value is clamped to the raster range and mapped to row
//! `floor((v - lo) / (hi - lo) * H)` (clamped to `H - 1`); consecutive
//! minutes are joined by a vertical segment so strokes stay connected.
//! `multi_channel` stacks the per-channel rasters along the channel axis,
//! `stacked_vertical` concatenates them along the height axis into one
//! grayscale plane.

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::types::{BlockConfig, DayFeatureGrid, Encoding, N_CONTINUOUS, N_DISCRETE};

/// One rasterized block.
#[derive(Debug, Clone)]
pub struct BlockImage {
    /// C x H x W with entries in {0, 1}.
    pub data: Array3<f32>,
    pub encoding: Encoding,
}

impl BlockImage {
    pub fn shape(&self) -> (usize, usize, usize) {
        self.data.dim()
    }
}

/// All blocks of one day: images plus the aligned discrete slices.
#[derive(Debug, Clone)]
pub struct BlockSequence {
    pub images: Vec<BlockImage>,
    /// 9 x 6N per block, always carried even when the image embeds them.
    pub discrete_blocks: Vec<Array2<f32>>,
}

impl BlockSequence {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Cut both grids into time-ordered, exhaustive block slices.
/// Returns (continuous slices 7 x 60N, discrete slices 9 x 6N).
pub fn segment_blocks(
    grid: &DayFeatureGrid,
    config: &BlockConfig,
) -> Result<(Vec<Array2<f32>>, Vec<Array2<f32>>)> {
    config.validate()?;
    let blocks = config.blocks_per_day();
    let (cw, dw) = (config.block_width(), config.discrete_block_width());
    let mut continuous = Vec::with_capacity(blocks);
    let mut discrete = Vec::with_capacity(blocks);
    for b in 0..blocks {
        continuous.push(
            grid.continuous
                .slice(ndarray::s![.., b * cw..(b + 1) * cw])
                .to_owned(),
        );
        discrete.push(
            grid.discrete
                .slice(ndarray::s![.., b * dw..(b + 1) * dw])
                .to_owned(),
        );
    }
    Ok((continuous, discrete))
}

/// Map one value to its raster row.
#[inline]
fn value_row(v: f32, lo: f32, hi: f32, height: usize) -> usize {
    let v = v.clamp(lo, hi);
    let r = ((v - lo) / (hi - lo) * height as f32).floor() as isize;
    r.clamp(0, height as isize - 1) as usize
}

/// Rasterize one channel row into `raster` (H x W), joining consecutive
/// minutes with a vertical segment.
fn rasterize_channel(
    values: ndarray::ArrayView1<f32>,
    lo: f32,
    hi: f32,
    mut raster: ndarray::ArrayViewMut2<f32>,
) {
    let height = raster.nrows();
    let mut prev: Option<usize> = None;
    for (t, &v) in values.iter().enumerate() {
        let r = value_row(v, lo, hi, height);
        let (top, bottom) = match prev {
            Some(p) => (p.min(r), p.max(r)),
            None => (r, r),
        };
        for row in top..=bottom {
            raster[[row, t]] = 1.0;
        }
        prev = Some(r);
    }
}

/// Rasterize a block slice where each row has its own value range.
pub fn rasterize_ranges(
    slice: &Array2<f32>,
    ranges: &[(f32, f32)],
    raster_height: usize,
    encoding: Encoding,
) -> Result<BlockImage> {
    let (channels, width) = slice.dim();
    if ranges.len() != channels {
        return Err(Error::Shape(format!(
            "{} ranges for {channels} channels",
            ranges.len()
        )));
    }
    for &(lo, hi) in ranges {
        if lo >= hi {
            return Err(Error::Config("raster range lo must be < hi".into()));
        }
    }
    let data = match encoding {
        Encoding::MultiChannel => {
            let mut data = Array3::<f32>::zeros((channels, raster_height, width));
            for k in 0..channels {
                rasterize_channel(
                    slice.row(k),
                    ranges[k].0,
                    ranges[k].1,
                    data.index_axis_mut(ndarray::Axis(0), k),
                );
            }
            data
        }
        Encoding::StackedVertical => {
            let mut data = Array3::<f32>::zeros((1, channels * raster_height, width));
            for k in 0..channels {
                let band = ndarray::s![0, k * raster_height..(k + 1) * raster_height, ..];
                rasterize_channel(slice.row(k), ranges[k].0, ranges[k].1, data.slice_mut(band));
            }
            data
        }
    };
    Ok(BlockImage {
        data,
        encoding,
    })
}

/// Rasterize a continuous block slice under the configured value range.
pub fn rasterize(slice: &Array2<f32>, config: &BlockConfig) -> Result<BlockImage> {
    let ranges = vec![config.value_range; slice.nrows()];
    rasterize_ranges(slice, &ranges, config.raster_height, config.encoding)
}

/// Repeat each ten-minute column ten times to align with minute columns.
fn upsample_discrete(slice: &Array2<f32>) -> Array2<f32> {
    let (rows, cols) = slice.dim();
    let mut out = Array2::<f32>::zeros((rows, cols * 10));
    for r in 0..rows {
        for c in 0..cols {
            for k in 0..10 {
                out[[r, c * 10 + k]] = slice[[r, c]];
            }
        }
    }
    out
}

/// Segment and rasterize one day. With `discrete_in_image` the nine
/// discrete rows (scaled to [0, 1]) are upsampled to minute resolution and
/// rasterized as extra channels with range [0, 1].
pub fn build_block_sequence(grid: &DayFeatureGrid, config: &BlockConfig) -> Result<BlockSequence> {
    let (continuous, discrete) = segment_blocks(grid, config)?;
    let mut images = Vec::with_capacity(continuous.len());
    for (cont, disc) in continuous.iter().zip(discrete.iter()) {
        let image = if config.discrete_in_image {
            let up = upsample_discrete(disc);
            let mut slice = Array2::<f32>::zeros((N_CONTINUOUS + N_DISCRETE, cont.ncols()));
            slice
                .slice_mut(ndarray::s![..N_CONTINUOUS, ..])
                .assign(cont);
            slice
                .slice_mut(ndarray::s![N_CONTINUOUS.., ..])
                .assign(&up);
            let mut ranges = vec![config.value_range; N_CONTINUOUS];
            ranges.extend(std::iter::repeat((0.0, 1.0)).take(N_DISCRETE));
            rasterize_ranges(&slice, &ranges, config.raster_height, config.encoding)?
        } else {
            rasterize(cont, config)?
        };
        images.push(image);
    }
    Ok(BlockSequence {
        images,
        discrete_blocks: discrete,
    })
}

/// Dump a block image as grayscale PNGs, one per channel plane, with high
/// values at the top of the picture. Returns the written paths.
pub fn write_block_pngs(
    image: &BlockImage,
    dir: &std::path::Path,
    stem: &str,
) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let (channels, height, width) = image.shape();
    let mut paths = Vec::with_capacity(channels);
    for k in 0..channels {
        let mut png = image::GrayImage::new(width as u32, height as u32);
        for r in 0..height {
            for t in 0..width {
                let v = (image.data[[k, r, t]] * 255.0) as u8;
                // flip vertically: raster row 0 is the range minimum
                png.put_pixel(t as u32, (height - 1 - r) as u32, image::Luma([v]));
            }
        }
        let path = dir.join(format!("{stem}_ch{k}.png"));
        png.save(&path)
            .map_err(|e| Error::Data(format!("png write failed: {e}")))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn grid_with(value: f32) -> DayFeatureGrid {
        DayFeatureGrid {
            continuous: Array2::from_elem((N_CONTINUOUS, 1440), value),
            discrete: Array2::from_elem((N_DISCRETE, 144), 0.5),
            observed_mask: Array2::from_elem((N_CONTINUOUS, 1440), true),
        }
    }

    #[test]
    fn binning_formula_center() {
        // v = 0 with range [-3, 3], H = 64 -> row 32
        assert_eq!(value_row(0.0, -3.0, 3.0, 64), 32);
        assert_eq!(value_row(-3.0, -3.0, 3.0, 64), 0);
        assert_eq!(value_row(3.0, -3.0, 3.0, 64), 63); // clamped top bin
        assert_eq!(value_row(100.0, -3.0, 3.0, 64), 63);
    }

    #[test]
    fn block_counts_by_n_hours() {
        let grid = grid_with(0.0);
        for (n_hours, blocks, cw, dw) in [(4usize, 6usize, 240usize, 24usize), (2, 12, 120, 12), (24, 1, 1440, 144)] {
            let config = BlockConfig {
                n_hours,
                ..BlockConfig::default()
            };
            let (cont, disc) = segment_blocks(&grid, &config).unwrap();
            assert_eq!(cont.len(), blocks);
            assert_eq!(disc.len(), blocks);
            assert_eq!(cont[0].dim(), (N_CONTINUOUS, cw));
            assert_eq!(disc[0].dim(), (N_DISCRETE, dw));
        }
    }

    #[test]
    fn n_hours_not_dividing_24_errors() {
        let config = BlockConfig {
            n_hours: 5,
            ..BlockConfig::default()
        };
        assert!(segment_blocks(&grid_with(0.0), &config).is_err());
    }

    #[test]
    fn segmentation_is_exhaustive_and_ordered() {
        let mut grid = grid_with(0.0);
        for t in 0..1440 {
            grid.continuous[[0, t]] = t as f32;
        }
        let config = BlockConfig::default();
        let (cont, _) = segment_blocks(&grid, &config).unwrap();
        let mut seen = Vec::new();
        for slice in &cont {
            seen.extend(slice.row(0).iter().copied());
        }
        assert_eq!(seen, (0..1440).map(|t| t as f32).collect::<Vec<_>>());
    }

    #[test]
    fn image_shapes_for_both_encodings() {
        let grid = grid_with(0.0);
        let config = BlockConfig::default(); // N=4, H=64
        let seq = build_block_sequence(&grid, &config).unwrap();
        assert_eq!(seq.images[0].shape(), (7, 64, 240));

        let config = BlockConfig {
            encoding: Encoding::StackedVertical,
            ..BlockConfig::default()
        };
        let seq = build_block_sequence(&grid, &config).unwrap();
        assert_eq!(seq.images[0].shape(), (1, 448, 240));
    }

    #[test]
    fn constant_channel_lights_exactly_one_row() {
        let slice = Array2::from_elem((7, 240), 1.5f32);
        let image = rasterize(&slice, &BlockConfig::default()).unwrap();
        for k in 0..7 {
            let plane = image.data.index_axis(ndarray::Axis(0), k);
            let lit_rows: Vec<usize> = (0..64)
                .filter(|&r| plane.row(r).iter().any(|&v| v > 0.0))
                .collect();
            assert_eq!(lit_rows.len(), 1);
            // every column lit in that row
            assert!(plane.row(lit_rows[0]).iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn pixels_are_binary_and_every_column_lit() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let slice = Array2::from_shape_fn((7, 240), |_| rng.gen_range(-4.0f32..4.0));
        for encoding in [Encoding::MultiChannel, Encoding::StackedVertical] {
            let config = BlockConfig {
                encoding,
                ..BlockConfig::default()
            };
            let image = rasterize(&slice, &config).unwrap();
            assert!(image.data.iter().all(|&v| v == 0.0 || v == 1.0));
            let (c, h, w) = image.shape();
            let per_channel_h = h / if c == 1 { 7 } else { 1 };
            for k in 0..7 {
                for t in 0..w {
                    let lit = (0..per_channel_h).any(|r| {
                        let (ci, ri) = if c == 1 { (0, k * per_channel_h + r) } else { (k, r) };
                        image.data[[ci, ri, t]] == 1.0
                    });
                    assert!(lit, "channel {k} column {t} has no lit pixel");
                }
            }
        }
    }

    #[test]
    fn channel_permutation_is_equivariant() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let slice = Array2::from_shape_fn((7, 120), |_| rng.gen_range(-3.0f32..3.0));
        let perm = [3usize, 0, 6, 1, 5, 2, 4];
        let mut permuted = slice.clone();
        for (dst, &src) in perm.iter().enumerate() {
            permuted.row_mut(dst).assign(&slice.row(src));
        }
        let config = BlockConfig {
            n_hours: 2,
            ..BlockConfig::default()
        };
        let base = rasterize(&slice, &config).unwrap();
        let swapped = rasterize(&permuted, &config).unwrap();
        for (dst, &src) in perm.iter().enumerate() {
            assert_eq!(
                swapped.data.index_axis(ndarray::Axis(0), dst),
                base.data.index_axis(ndarray::Axis(0), src)
            );
        }
        // stacked-vertical bands permute the same way
        let config = BlockConfig {
            n_hours: 2,
            encoding: Encoding::StackedVertical,
            ..BlockConfig::default()
        };
        let base = rasterize(&slice, &config).unwrap();
        let swapped = rasterize(&permuted, &config).unwrap();
        let h = 64;
        for (dst, &src) in perm.iter().enumerate() {
            assert_eq!(
                swapped.data.slice(ndarray::s![0, dst * h..(dst + 1) * h, ..]),
                base.data.slice(ndarray::s![0, src * h..(src + 1) * h, ..])
            );
        }
    }

    /// Decode a single-channel raster back to rows: in each column take the
    /// endpoint of the lit span farthest from the previously decoded row.
    fn decode_rows(plane: ndarray::ArrayView2<f32>) -> Vec<usize> {
        let (h, w) = plane.dim();
        let mut rows = Vec::with_capacity(w);
        let mut prev: Option<usize> = None;
        for t in 0..w {
            let lit: Vec<usize> = (0..h).filter(|&r| plane[[r, t]] == 1.0).collect();
            let (lo, hi) = (*lit.first().unwrap(), *lit.last().unwrap());
            let r = match prev {
                Some(p) => {
                    if p.abs_diff(lo) >= p.abs_diff(hi) {
                        lo
                    } else {
                        hi
                    }
                }
                None => lo,
            };
            rows.push(r);
            prev = Some(r);
        }
        rows
    }

    #[test]
    fn rasterization_is_reconstructible_within_one_bin() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let config = BlockConfig::default();
        let (lo, hi) = config.value_range;
        let bin = (hi - lo) / config.raster_height as f32;
        let slice = Array2::from_shape_fn((7, 240), |_| rng.gen_range(-3.5f32..3.5));
        let image = rasterize(&slice, &config).unwrap();
        for k in 0..7 {
            let rows = decode_rows(image.data.index_axis(ndarray::Axis(0), k));
            for (t, &r) in rows.iter().enumerate() {
                let truth = slice[[k, t]].clamp(lo, hi);
                let decoded = lo + (r as f32 + 0.5) * bin;
                assert!(
                    (decoded - truth).abs() <= bin,
                    "channel {k} t {t}: decoded {decoded} truth {truth}"
                );
            }
        }
    }

    #[test]
    fn discrete_in_image_adds_nine_channels() {
        let grid = grid_with(0.0);
        let config = BlockConfig {
            discrete_in_image: true,
            ..BlockConfig::default()
        };
        let seq = build_block_sequence(&grid, &config).unwrap();
        assert_eq!(seq.images[0].shape(), (16, 64, 240));
        // discrete blocks still carried for diagnostics
        assert_eq!(seq.discrete_blocks.len(), 6);
    }

    #[test]
    fn png_dump_writes_one_file_per_channel() {
        let grid = grid_with(0.7);
        let seq = build_block_sequence(&grid, &BlockConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_block_pngs(&seq.images[0], dir.path(), "b0").unwrap();
        assert_eq!(paths.len(), 7);
        assert!(paths.iter().all(|p| p.exists()));
    }
}
