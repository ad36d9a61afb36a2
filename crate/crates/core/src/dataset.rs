//! Training-pair construction: exact defect -> reflection spectrum ->
//! wavenumber-space inversion -> (pre-reconstruction, exact) pair.
//!
//! Depth vectors in a dataset are stored dimensionless (divided by the
//! plate half thickness, recorded in the provenance) so network inputs
//! stay O(0.1); reconstruction multiplies the scale back on output.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::defects::{random_defect, sample_profile, DefectClass, DefectParams, RandomizationRanges};
use crate::error::{Error, Result};
use crate::physics::{forward_reflection, wnst_invert, PlateSpec, SpatialGrid, WavenumberGrid};
use crate::seeding::{stream, Domain};

pub const DATASET_FORMAT: &str = "wavenet-ndt/dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidParameter(format!("unknown split '{other}'"))),
        }
    }
}

/// Additive white Gaussian noise level, calibrated against the effective
/// power of the signal it is added to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub snr_db: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { snr_db: 15.0 }
    }
}

/// One training pair: the pre-reconstruction profile (network input) and
/// the exact defect (target), both dimensionless.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub class: DefectClass,
    pub noisy: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Mixed,
    NoisyRect,
}

/// Everything needed to regenerate a dataset bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: DatasetKind,
    pub count: usize,
    pub seed: u64,
    pub plate: PlateSpec,
    pub grid: SpatialGrid,
    pub ranges: RandomizationRanges,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise: Option<NoiseConfig>,
    /// Depths in the records are divided by this scale (m).
    pub depth_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefectDataset {
    pub samples: Vec<SamplePair>,
    pub splits: Vec<Split>,
    pub provenance: Provenance,
}

impl DefectDataset {
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.splits
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn split_pairs(&self, split: Split) -> Vec<&SamplePair> {
        self.split_indices(split).into_iter().map(|i| &self.samples[i]).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Mean of squares, the signal power reference for noise calibration.
pub fn effective_power(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64)
}

/// Build one (pre-reconstruction, exact) pair for a defect, dimensionless.
pub fn build_sample(
    params: &DefectParams,
    plate: &PlateSpec,
    grid: &SpatialGrid,
    wavenumbers: &WavenumberGrid,
) -> Result<SamplePair> {
    let target_profile = sample_profile(params, grid)?;
    let spectrum = forward_reflection(&target_profile, plate, wavenumbers)?;
    let input_profile = wnst_invert(&spectrum, plate, grid)?;
    let scale = plate.half_thickness;
    Ok(SamplePair {
        input: input_profile.depths.iter().map(|d| d / scale).collect(),
        target: target_profile.depths.iter().map(|d| d / scale).collect(),
        class: params.class,
        noisy: false,
    })
}

/// Add white Gaussian noise to the input at the configured SNR; the
/// target is left untouched.
pub fn add_noise(pair: &SamplePair, cfg: &NoiseConfig, rng: &mut ChaCha8Rng) -> Result<SamplePair> {
    let power = effective_power(&pair.input)?;
    if power <= 0.0 {
        return Err(Error::ZeroSignal);
    }
    let sigma = (power / 10f64.powf(cfg.snr_db / 10.0)).sqrt();
    let input = pair
        .input
        .iter()
        .map(|&v| {
            let n: f64 = StandardNormal.sample(rng);
            v + sigma * n
        })
        .collect();
    Ok(SamplePair { input, target: pair.target.clone(), class: pair.class, noisy: true })
}

/// Full recipe for a generated dataset.
#[derive(Debug, Clone)]
pub struct GenerationSpec {
    pub kind: DatasetKind,
    pub count: usize,
    pub seed: u64,
    pub plate: PlateSpec,
    pub grid: SpatialGrid,
    pub ranges: RandomizationRanges,
    pub noise: Option<NoiseConfig>,
}

impl GenerationSpec {
    pub fn mixed(count: usize, seed: u64, plate: PlateSpec, grid: SpatialGrid) -> Self {
        Self { kind: DatasetKind::Mixed, count, seed, plate, grid, ranges: RandomizationRanges::default(), noise: None }
    }

    pub fn noisy_rect(count: usize, seed: u64, plate: PlateSpec, grid: SpatialGrid, noise: NoiseConfig) -> Self {
        Self {
            kind: DatasetKind::NoisyRect,
            count,
            seed,
            plate,
            grid,
            ranges: RandomizationRanges::default(),
            noise: Some(noise),
        }
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            kind: self.kind,
            count: self.count,
            seed: self.seed,
            plate: self.plate,
            grid: self.grid,
            ranges: self.ranges,
            noise: self.noise,
            depth_scale: self.plate.half_thickness,
        }
    }
}

fn class_for_index(kind: DatasetKind, index: usize) -> DefectClass {
    match kind {
        DatasetKind::Mixed => DefectClass::ALL[index % 3],
        DatasetKind::NoisyRect => DefectClass::Rect,
    }
}

/// Generate a dataset from its recipe. Embarrassingly parallel over
/// samples; per-sample seed streams keep the result independent of the
/// thread count.
pub fn generate(spec: &GenerationSpec) -> Result<DefectDataset> {
    if spec.count == 0 {
        return Err(Error::InvalidParameter("count must be > 0".into()));
    }
    if spec.kind == DatasetKind::Mixed && !spec.count.is_multiple_of(3) {
        return Err(Error::InvalidParameter(format!(
            "mixed dataset count must be divisible by 3, got {}",
            spec.count
        )));
    }
    if spec.kind == DatasetKind::NoisyRect && spec.noise.is_none() {
        return Err(Error::InvalidParameter("noisy-rect dataset needs a noise config".into()));
    }
    spec.ranges.validate()?;
    let wavenumbers = WavenumberGrid::matched_to(&spec.grid);

    let samples: Vec<SamplePair> = (0..spec.count)
        .into_par_iter()
        .map(|i| {
            let class = class_for_index(spec.kind, i);
            let mut rng = stream(spec.seed, Domain::DefectParams, i as u64);
            let params = random_defect(class, &spec.ranges, &spec.plate, &spec.grid, &mut rng)?;
            let pair = build_sample(&params, &spec.plate, &spec.grid, &wavenumbers)?;
            match spec.noise {
                Some(cfg) => {
                    let mut noise_rng = stream(spec.seed, Domain::Noise, i as u64);
                    add_noise(&pair, &cfg, &mut noise_rng)
                }
                None => Ok(pair),
            }
        })
        .collect::<Result<_>>()?;

    let splits = assign_splits(&samples, spec.seed);
    Ok(DefectDataset { samples, splits, provenance: spec.provenance() })
}

/// Stratified shuffled split, 75% / 17.5% / 7.5% per class.
fn assign_splits(samples: &[SamplePair], seed: u64) -> Vec<Split> {
    let mut splits = vec![Split::Train; samples.len()];
    for (class_idx, class) in DefectClass::ALL.iter().enumerate() {
        let mut indices: Vec<usize> = samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.class == *class)
            .map(|(i, _)| i)
            .collect();
        if indices.is_empty() {
            continue;
        }
        let mut rng = stream(seed, Domain::Shuffle, class_idx as u64);
        // Fisher-Yates with the per-class stream.
        for i in (1..indices.len()).rev() {
            let j = rng.random_range(0..=i);
            indices.swap(i, j);
        }
        let c = indices.len();
        let train_n = ((c as f64) * 0.75).round() as usize;
        let val_n = ((c as f64) * 0.175).round() as usize;
        for (pos, &idx) in indices.iter().enumerate() {
            splits[idx] = if pos < train_n {
                Split::Train
            } else if pos < train_n + val_n {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    splits
}

/// Mixed triangle/rectangle/step dataset with default physics, balanced
/// classes, split 75/17.5/7.5.
pub fn build_mixed_dataset(count: usize, seed: u64, plate: PlateSpec, grid: SpatialGrid) -> Result<DefectDataset> {
    generate(&GenerationSpec::mixed(count, seed, plate, grid))
}

/// Rectangles only, white noise injected into every input.
pub fn build_noisy_rect_dataset(
    count: usize,
    cfg: NoiseConfig,
    seed: u64,
    plate: PlateSpec,
    grid: SpatialGrid,
) -> Result<DefectDataset> {
    generate(&GenerationSpec::noisy_rect(count, seed, plate, grid, cfg))
}

/// Regenerate a dataset from stored provenance; bit-identical to the
/// dataset the provenance was taken from.
pub fn regenerate(provenance: &Provenance) -> Result<DefectDataset> {
    generate(&GenerationSpec {
        kind: provenance.kind,
        count: provenance.count,
        seed: provenance.seed,
        plate: provenance.plate,
        grid: provenance.grid,
        ranges: provenance.ranges,
        noise: provenance.noise,
    })
}

#[derive(Serialize, Deserialize)]
struct HeaderRecord {
    format: String,
    version: u32,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct SampleRecord {
    input: Vec<f64>,
    target: Vec<f64>,
    class: DefectClass,
    noisy: bool,
    split: Split,
}

/// Write as JSON-lines: one header record, then one record per sample.
pub fn save_dataset(ds: &DefectDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    let header = HeaderRecord {
        format: DATASET_FORMAT.to_string(),
        version: DATASET_VERSION,
        provenance: ds.provenance.clone(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for (pair, split) in ds.samples.iter().zip(&ds.splits) {
        let record = SampleRecord {
            input: pair.input.clone(),
            target: pair.target.clone(),
            class: pair.class,
            noisy: pair.noisy,
            split: *split,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<DefectDataset> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::FormatVersionMismatch {
            expected: format!("{DATASET_FORMAT} v{DATASET_VERSION}"),
            found: "empty file".into(),
        })??;
    let header: HeaderRecord = serde_json::from_str(&header_line).map_err(|_| {
        Error::FormatVersionMismatch {
            expected: format!("{DATASET_FORMAT} v{DATASET_VERSION}"),
            found: "unrecognized header".into(),
        }
    })?;
    if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
        return Err(Error::FormatVersionMismatch {
            expected: format!("{DATASET_FORMAT} v{DATASET_VERSION}"),
            found: format!("{} v{}", header.format, header.version),
        });
    }
    let n = header.provenance.grid.point_count;
    let mut samples = Vec::new();
    let mut splits = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SampleRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("record {}: {e}", lineno + 1)))?;
        if record.input.len() != n || record.target.len() != n {
            return Err(Error::Parse(format!(
                "record {}: vectors must have {n} entries",
                lineno + 1
            )));
        }
        samples.push(SamplePair {
            input: record.input,
            target: record.target,
            class: record.class,
            noisy: record.noisy,
        });
        splits.push(record.split);
    }
    Ok(DefectDataset { samples, splits, provenance: header.provenance })
}
