//! Dataset loading, label-ratio sampling and a synthetic generator.
//!
//! Supported on-disk formats:
//!
//! * IDX (MNIST / Fashion-MNIST): big-endian; images start with magic
//!   `0x00000803`, count, rows, cols; labels with `0x00000801`, count.
//! * CIFAR-10 binary: 3073-byte records, one label byte then 3072 pixels.
//! * CIFAR-100 binary: 3074-byte records, coarse label, fine label, pixels.
//!   Coarse labels are paired into ten buckets: `(0,1) → 0`, `(2,3) → 1`, ...
//!
//! Pixels become `value / 255` and images are flattened in file order, so a
//! CIFAR vector has 3072 coordinates (three colour planes of 1024).

use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gaussian_mech::{standard_normal, NoiseRng};
use crate::hetero_measures::VectorDataset;

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;
pub const CIFAR_PIXELS: usize = 3072;
pub const DEFAULT_SAMPLE_FRACTION: f64 = 0.02;

fn parse_err<T>(offset: u64, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        offset,
        message: message.into(),
    })
}

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    match bytes.get(offset..offset + 4) {
        Some(b) => Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]])),
        None => parse_err(
            bytes.len().min(offset) as u64,
            format!("file truncated while reading {what}"),
        ),
    }
}

/// Parsed IDX image file: `count` images of `rows × cols` pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = read_u32(bytes, 0, "image magic")?;
    if magic != IDX_IMAGE_MAGIC {
        return parse_err(0, format!("expected image magic 0x{IDX_IMAGE_MAGIC:08x}, found 0x{magic:08x}"));
    }
    let count = read_u32(bytes, 4, "image count")? as usize;
    let rows = read_u32(bytes, 8, "row count")? as usize;
    let cols = read_u32(bytes, 12, "column count")? as usize;
    let need = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Parse {
            offset: 4,
            message: "image dimensions overflow".into(),
        })?;
    let body = &bytes[16..];
    if body.len() < need {
        return parse_err(
            bytes.len() as u64,
            format!("file truncated: {need} pixel bytes expected, {} present", body.len()),
        );
    }
    if body.len() > need {
        return parse_err(16 + need as u64, format!("{} trailing bytes after image data", body.len() - need));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body.iter().map(|&b| f64::from(b) / 255.0).collect(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u32>> {
    let magic = read_u32(bytes, 0, "label magic")?;
    if magic != IDX_LABEL_MAGIC {
        return parse_err(0, format!("expected label magic 0x{IDX_LABEL_MAGIC:08x}, found 0x{magic:08x}"));
    }
    let count = read_u32(bytes, 4, "label count")? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return parse_err(
            bytes.len() as u64,
            format!("file truncated: {count} labels expected, {} present", body.len()),
        );
    }
    if body.len() > count {
        return parse_err(8 + count as u64, format!("{} trailing bytes after labels", body.len() - count));
    }
    Ok(body.iter().map(|&b| u32::from(b)).collect())
}

/// Loads an IDX image/label file pair.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<VectorDataset> {
    let images = parse_idx_images(&fs::read(images_path)?)?;
    let labels = parse_idx_labels(&fs::read(labels_path)?)?;
    if images.count != labels.len() {
        return parse_err(
            4,
            format!("{} images but {} labels", images.count, labels.len()),
        );
    }
    VectorDataset::new(images.pixels, labels, images.rows * images.cols)
}

fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

fn label_byte(label: u32) -> Result<u8> {
    u8::try_from(label).map_err(|_| Error::Domain(format!("label {label} does not fit in a byte")))
}

pub fn encode_idx_images(data: &VectorDataset, rows: usize, cols: usize) -> Result<Vec<u8>> {
    if rows * cols != data.d() {
        return domain(format!("{rows}x{cols} images do not have {} pixels", data.d()));
    }
    let mut out = Vec::with_capacity(16 + data.values().len());
    for v in [IDX_IMAGE_MAGIC, data.n() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend(data.values().iter().map(|&v| quantize(v)));
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u32]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for &l in labels {
        out.push(label_byte(l)?);
    }
    Ok(out)
}

/// Writes a dataset as an IDX pair. Values are quantized to the 1/255 grid.
pub fn write_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    data: &VectorDataset,
    rows: usize,
    cols: usize,
) -> Result<()> {
    fs::write(images_path, encode_idx_images(data, rows, cols)?)?;
    fs::write(labels_path, encode_idx_labels(data.labels())?)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CifarVariant {
    Ten,
    Hundred,
}

impl CifarVariant {
    pub fn record_len(self) -> usize {
        match self {
            CifarVariant::Ten => 1 + CIFAR_PIXELS,
            CifarVariant::Hundred => 2 + CIFAR_PIXELS,
        }
    }
}

/// Parses CIFAR binary records; `base_offset` is added to error offsets.
pub fn parse_cifar(bytes: &[u8], variant: CifarVariant, base_offset: u64) -> Result<(Vec<f64>, Vec<u32>)> {
    let rec = variant.record_len();
    if !bytes.len().is_multiple_of(rec) {
        return parse_err(
            base_offset + (bytes.len() - bytes.len() % rec) as u64,
            format!("length {} is not a multiple of the {rec}-byte record size", bytes.len()),
        );
    }
    let count = bytes.len() / rec;
    let mut pixels = Vec::with_capacity(count * CIFAR_PIXELS);
    let mut labels = Vec::with_capacity(count);
    for (k, record) in bytes.chunks_exact(rec).enumerate() {
        let at = base_offset + (k * rec) as u64;
        let label = match variant {
            CifarVariant::Ten => {
                if record[0] > 9 {
                    return parse_err(at, format!("CIFAR-10 label {} out of range", record[0]));
                }
                u32::from(record[0])
            }
            CifarVariant::Hundred => {
                if record[0] > 19 {
                    return parse_err(at, format!("CIFAR-100 coarse label {} out of range", record[0]));
                }
                if record[1] > 99 {
                    return parse_err(at + 1, format!("CIFAR-100 fine label {} out of range", record[1]));
                }
                u32::from(record[0] / 2)
            }
        };
        labels.push(label);
        let start = rec - CIFAR_PIXELS;
        pixels.extend(record[start..].iter().map(|&b| f64::from(b) / 255.0));
    }
    Ok((pixels, labels))
}

/// Loads and concatenates one or more CIFAR binary files.
pub fn load_cifar<P: AsRef<Path>>(paths: &[P], variant: CifarVariant) -> Result<VectorDataset> {
    if paths.is_empty() {
        return domain("no CIFAR files given");
    }
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let (p, l) = parse_cifar(&fs::read(path)?, variant, 0).map_err(|e| match e {
            Error::Parse { offset, message } => Error::Parse {
                offset,
                message: format!("{}: {message}", path.as_ref().display()),
            },
            other => other,
        })?;
        pixels.extend(p);
        labels.extend(l);
    }
    VectorDataset::new(pixels, labels, CIFAR_PIXELS)
}

/// Encodes records; CIFAR-100 writes bucket `b` as coarse label `2b`, fine label 0.
pub fn encode_cifar(data: &VectorDataset, variant: CifarVariant) -> Result<Vec<u8>> {
    if data.d() != CIFAR_PIXELS {
        return domain(format!("CIFAR records need {CIFAR_PIXELS} values, dataset has {}", data.d()));
    }
    let mut out = Vec::with_capacity(data.n() * variant.record_len());
    for (row, &label) in data.rows().zip(data.labels()) {
        if label > 9 {
            return domain(format!("label {label} cannot be written as a CIFAR record"));
        }
        match variant {
            CifarVariant::Ten => out.push(label as u8),
            CifarVariant::Hundred => out.extend_from_slice(&[2 * label as u8, 0]),
        }
        out.extend(row.iter().map(|&v| quantize(v)));
    }
    Ok(out)
}

pub fn write_cifar(path: impl AsRef<Path>, data: &VectorDataset, variant: CifarVariant) -> Result<()> {
    fs::write(path, encode_cifar(data, variant)?)?;
    Ok(())
}

/// Label ratios for one sampled subset; bucket `i` draws from label `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneityProfile {
    pub name: String,
    pub ratios: Vec<u32>,
    pub sample_fraction: f64,
}

impl HeterogeneityProfile {
    pub fn new(name: impl Into<String>, ratios: Vec<u32>, sample_fraction: f64) -> Result<Self> {
        let p = Self {
            name: name.into(),
            ratios,
            sample_fraction,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if ![2, 5, 10].contains(&self.ratios.len()) {
            return domain(format!(
                "profile '{}' has {} label buckets; expected 2, 5 or 10",
                self.name,
                self.ratios.len()
            ));
        }
        if self.ratios.iter().all(|&r| r == 0) {
            return domain(format!("profile '{}' has no positive ratio", self.name));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return domain(format!(
                "profile '{}' sample fraction {} outside (0, 1]",
                self.name, self.sample_fraction
            ));
        }
        Ok(())
    }

    pub fn label_count(&self) -> usize {
        self.ratios.len()
    }

    /// True when every bucket has the same ratio.
    pub fn is_balanced(&self) -> bool {
        self.ratios.windows(2).all(|w| w[0] == w[1])
    }

    pub fn with_fraction(&self, sample_fraction: f64) -> Result<Self> {
        Self::new(self.name.clone(), self.ratios.clone(), sample_fraction)
    }

    /// The six standard profiles: balanced and skewed at 10, 5 and 2 labels.
    pub fn canonical(sample_fraction: f64) -> Result<Vec<Self>> {
        let skew = |lead: u32, k: usize| {
            let mut r = vec![1; k];
            r[0] = lead;
            r
        };
        [
            ("balanced-10", vec![1; 10]),
            ("skewed-10", skew(91, 10)),
            ("balanced-5", vec![1; 5]),
            ("skewed-5", skew(96, 5)),
            ("balanced-2", vec![1; 2]),
            ("skewed-2", skew(99, 2)),
        ]
        .into_iter()
        .map(|(name, ratios)| Self::new(name, ratios, sample_fraction))
        .collect()
    }

    /// Looks up a canonical profile by name.
    pub fn named(name: &str, sample_fraction: f64) -> Result<Self> {
        Self::canonical(sample_fraction)?
            .into_iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Domain(format!("unknown profile '{name}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetFormat {
    IdxImages,
    Cifar10Bin,
    Cifar100Bin,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelScheme {
    Fine,
    CoarseBucketed,
}

/// Generator settings for [`DatasetFormat::Synthetic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub pool_size: usize,
    pub heterogeneity: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub name: String,
    pub format: DatasetFormat,
    /// A file or a directory of standard file names (see [`DatasetDescriptor::load`]).
    pub path: Option<PathBuf>,
    pub d: usize,
    pub label_scheme: LabelScheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

const IDX_NAMES: [(&str, &str); 2] = [
    ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
];

impl DatasetDescriptor {
    pub fn synthetic(name: impl Into<String>, d: usize, spec: SyntheticSpec) -> Self {
        Self {
            name: name.into(),
            format: DatasetFormat::Synthetic,
            path: None,
            d,
            label_scheme: LabelScheme::Fine,
            synthetic: Some(spec),
        }
    }

    pub fn on_disk(name: impl Into<String>, format: DatasetFormat, path: PathBuf) -> Result<Self> {
        let (d, label_scheme) = match format {
            DatasetFormat::IdxImages => (784, LabelScheme::Fine),
            DatasetFormat::Cifar10Bin => (CIFAR_PIXELS, LabelScheme::Fine),
            DatasetFormat::Cifar100Bin => (CIFAR_PIXELS, LabelScheme::CoarseBucketed),
            DatasetFormat::Synthetic => return domain("synthetic datasets have no path"),
        };
        Ok(Self {
            name: name.into(),
            format,
            path: Some(path),
            d,
            label_scheme,
            synthetic: None,
        })
    }

    /// Loads the dataset.
    ///
    /// A directory path is searched for the usual distribution file names:
    /// `train-{images-idx3,labels-idx1}-ubyte` (plus the `t10k-` pair when
    /// present) for IDX, `data_batch_*.bin` / `test_batch.bin` for CIFAR-10
    /// and `train.bin` / `test.bin` for CIFAR-100. A file path is read directly
    /// (for IDX, the labels file is found by replacing `images-idx3` with
    /// `labels-idx1` in its name).
    pub fn load(&self) -> Result<VectorDataset> {
        let data = match self.format {
            DatasetFormat::Synthetic => {
                let spec = self
                    .synthetic
                    .ok_or_else(|| Error::Domain("synthetic dataset without generator settings".into()))?;
                synthetic_dataset(spec.pool_size, self.d, spec.heterogeneity, spec.seed)?
            }
            DatasetFormat::IdxImages => self.load_idx_files()?,
            DatasetFormat::Cifar10Bin => load_cifar(&self.cifar_files(CifarVariant::Ten)?, CifarVariant::Ten)?,
            DatasetFormat::Cifar100Bin => {
                load_cifar(&self.cifar_files(CifarVariant::Hundred)?, CifarVariant::Hundred)?
            }
        };
        if data.d() != self.d {
            return domain(format!(
                "dataset '{}' has dimension {}, descriptor says {}",
                self.name,
                data.d(),
                self.d
            ));
        }
        Ok(data)
    }

    fn require_path(&self) -> Result<&Path> {
        self.path
            .as_deref()
            .ok_or_else(|| Error::Domain(format!("dataset '{}' has no path", self.name)))
    }

    fn load_idx_files(&self) -> Result<VectorDataset> {
        let path = self.require_path()?;
        if path.is_file() {
            let name = path.file_name().and_then(|s| s.to_str()).unwrap_or_default();
            let labels = path.with_file_name(name.replace("images-idx3", "labels-idx1"));
            return load_idx(path, labels);
        }
        let mut parts = Vec::new();
        for (img, lab) in IDX_NAMES {
            let (img, lab) = (path.join(img), path.join(lab));
            if img.is_file() && lab.is_file() {
                parts.push(load_idx(img, lab)?);
            }
        }
        if parts.is_empty() {
            return domain(format!("no IDX image/label pair found in {}", path.display()));
        }
        concat(parts)
    }

    fn cifar_files(&self, variant: CifarVariant) -> Result<Vec<PathBuf>> {
        let path = self.require_path()?;
        if path.is_file() {
            return Ok(vec![path.to_path_buf()]);
        }
        let names: Vec<String> = match variant {
            CifarVariant::Ten => (1..=5)
                .map(|i| format!("data_batch_{i}.bin"))
                .chain(["test_batch.bin".to_string()])
                .collect(),
            CifarVariant::Hundred => vec!["train.bin".into(), "test.bin".into()],
        };
        let files: Vec<PathBuf> = names.iter().map(|n| path.join(n)).filter(|p| p.is_file()).collect();
        if files.is_empty() {
            return domain(format!("no CIFAR batch files found in {}", path.display()));
        }
        Ok(files)
    }
}

fn concat(parts: Vec<VectorDataset>) -> Result<VectorDataset> {
    let d = parts[0].d();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for p in parts {
        if p.d() != d {
            return domain("IDX files disagree on image size");
        }
        values.extend_from_slice(p.values());
        labels.extend_from_slice(p.labels());
    }
    VectorDataset::new(values, labels, d)
}

/// Splits `total` records across buckets in proportion to `ratios`.
///
/// Each bucket first gets `⌊total·rᵢ/Σr⌋`; the remainder goes one record at a
/// time to buckets in descending ratio order (ties by index).
pub fn allocate_counts(total: usize, ratios: &[u32]) -> Vec<usize> {
    let sum: u64 = ratios.iter().map(|&r| u64::from(r)).sum();
    if sum == 0 {
        return vec![0; ratios.len()];
    }
    let mut counts: Vec<usize> = ratios
        .iter()
        .map(|&r| (total as u64 * u64::from(r) / sum) as usize)
        .collect();
    let mut order: Vec<usize> = (0..ratios.len()).filter(|&i| ratios[i] > 0).collect();
    order.sort_by(|&a, &b| ratios[b].cmp(&ratios[a]).then(a.cmp(&b)));
    let mut left = total - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Draws `⌊fraction·n⌋` records with the profile's label ratios.
///
/// Records of each bucket's label are chosen uniformly without replacement;
/// the output lists bucket 0 first, each bucket in source order.
pub fn stratified_sample(data: &VectorDataset, profile: &HeterogeneityProfile, seed: u64) -> Result<VectorDataset> {
    profile.validate()?;
    let total = (profile.sample_fraction * data.n() as f64).floor() as usize;
    let counts = allocate_counts(total, &profile.ratios);
    let mut rng = NoiseRng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(total);
    for (bucket, &want) in counts.iter().enumerate() {
        let label = bucket as u32;
        let pool: Vec<usize> = (0..data.n()).filter(|&i| data.labels()[i] == label).collect();
        if pool.len() < want {
            return Err(Error::Capacity {
                bucket,
                label,
                requested: want,
                available: pool.len(),
            });
        }
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, pool.len(), want)
            .into_iter()
            .map(|k| pool[k])
            .collect();
        picked.sort_unstable();
        chosen.extend(picked);
    }
    Ok(data.select(&chosen))
}

/// Number of label clusters produced by [`synthetic_dataset`].
pub const SYNTHETIC_LABELS: usize = 10;

/// Label-clustered vectors in `[0,1]^d` whose heterogeneity grows with `h ∈ [0, 1]`.
///
/// Label `k` has base level `0.5 + 0.15h(2k/9 − 1)` and, as `h` grows, becomes
/// rarer for larger `k`. Each client adds a uniform offset in `±0.3h` to its
/// level and coordinate noise with spread `s`, where `s` shrinks from 0.25 at
/// `h = 0` to 0.01 at `h = 1`; one client in ten is ten times flatter. Client
/// centres stay inside `[0.05, 0.95]`, so whole rows are never clamped flat.
/// At `h = 0` every client is an independent draw around 0.5.
pub fn synthetic_dataset(n: usize, d: usize, heterogeneity: f64, seed: u64) -> Result<VectorDataset> {
    if n < 2 || d == 0 {
        return domain(format!("synthetic data needs n >= 2 and d >= 1, got n={n}, d={d}"));
    }
    if !(0.0..=1.0).contains(&heterogeneity) {
        return domain(format!("heterogeneity must be in [0, 1], got {heterogeneity}"));
    }
    let h = heterogeneity;
    let k_max = (SYNTHETIC_LABELS - 1) as f64;
    let label_weights: Vec<f64> = (0..SYNTHETIC_LABELS)
        .map(|k| 1.0 + 3.0 * h * (k_max - k as f64) / k_max)
        .collect();
    let labels_dist = WeightedIndex::new(&label_weights).expect("label weights are positive");
    let spread = 0.25 * (1.0 - h) + 0.01 * h;

    let mut rng = NoiseRng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let k = labels_dist.sample(&mut rng);
        let level = 0.5 + h * 0.15 * (2.0 * k as f64 / k_max - 1.0);
        let offset = 0.3 * h * (2.0 * rng.gen::<f64>() - 1.0);
        let s = if rng.gen::<f64>() < 0.1 {
            spread / 10.0
        } else {
            spread * rng.gen_range(0.5..1.5)
        };
        for _ in 0..d {
            values.push((level + offset + s * standard_normal(&mut rng)).clamp(0.0, 1.0));
        }
        labels.push(k as u32);
    }
    VectorDataset::new(values, labels, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate_counts(10, &[1, 1]), vec![5, 5]);
        assert_eq!(allocate_counts(100, &[99, 1]), vec![99, 1]);
        assert_eq!(allocate_counts(11, &[1, 1]), vec![6, 5]);
        assert_eq!(allocate_counts(7, &[96, 1, 1, 1, 1]), vec![7, 0, 0, 0, 0]);
        assert_eq!(allocate_counts(13, &[1; 10]).iter().sum::<usize>(), 13);
        assert_eq!(allocate_counts(3, &[0, 2, 1]), vec![0, 2, 1]);
    }

    #[test]
    fn canonical_profiles() {
        let p = HeterogeneityProfile::canonical(DEFAULT_SAMPLE_FRACTION).unwrap();
        assert_eq!(p.len(), 6);
        assert_eq!(p[1].ratios, vec![91, 1, 1, 1, 1, 1, 1, 1, 1, 1]);
        assert_eq!(p[3].ratios, vec![96, 1, 1, 1, 1]);
        assert_eq!(p[5].ratios, vec![99, 1]);
        assert!(p[0].is_balanced() && !p[1].is_balanced());
        assert!(HeterogeneityProfile::new("x", vec![1, 1, 1], 0.1).is_err());
        assert!(HeterogeneityProfile::new("x", vec![0, 0], 0.1).is_err());
        assert!(HeterogeneityProfile::new("x", vec![1, 1], 0.0).is_err());
    }

    fn labelled(labels: &[u32]) -> VectorDataset {
        let values = labels.iter().map(|&l| l as f64 / 10.0).collect();
        VectorDataset::new(values, labels.to_vec(), 1).unwrap()
    }

    #[test]
    fn stratified_examples() {
        let data = labelled(&[[0u32; 10], [1; 10]].concat());
        let p = HeterogeneityProfile::new("half", vec![1, 1], 0.5).unwrap();
        let s = stratified_sample(&data, &p, 3).unwrap();
        assert_eq!(s.labels().iter().filter(|&&l| l == 0).count(), 5);
        assert_eq!(s.labels().iter().filter(|&&l| l == 1).count(), 5);
        assert_eq!(stratified_sample(&data, &p, 3).unwrap(), s);

        let data = labelled(&[vec![0u32; 150], vec![1; 250]].concat());
        let p = HeterogeneityProfile::new("skew", vec![99, 1], 0.25).unwrap();
        let s = stratified_sample(&data, &p, 1).unwrap();
        assert_eq!(s.labels().iter().filter(|&&l| l == 0).count(), 99);

        let p = HeterogeneityProfile::new("skew", vec![1, 0], 0.5).unwrap();
        match stratified_sample(&data, &p, 1) {
            Err(Error::Capacity { bucket, requested, available, .. }) => {
                assert_eq!((bucket, requested, available), (0, 200, 150));
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn synthetic_contract() {
        let a = synthetic_dataset(50, 8, 0.7, 5).unwrap();
        assert_eq!(a, synthetic_dataset(50, 8, 0.7, 5).unwrap());
        assert!(a.values().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(a.labels().iter().all(|&l| l < 10));
        assert!(synthetic_dataset(1, 8, 0.5, 0).is_err());
        assert!(synthetic_dataset(10, 8, 1.5, 0).is_err());
    }

    #[test]
    fn idx_rejects_wrong_magic_and_truncation() {
        let labels = encode_idx_labels(&[1, 2]).unwrap();
        assert!(matches!(parse_idx_images(&labels), Err(Error::Parse { offset: 0, .. })));
        assert!(matches!(parse_idx_images(&[]), Err(Error::Parse { offset: 0, .. })));
        let mut images = IDX_IMAGE_MAGIC.to_be_bytes().to_vec();
        images.extend_from_slice(&labels[4..8]);
        assert!(matches!(parse_idx_labels(&images), Err(Error::Parse { offset: 0, .. })));
    }

    #[test]
    fn cifar_record_size() {
        let err = parse_cifar(&[0u8; 3072], CifarVariant::Ten, 0).unwrap_err();
        assert!(matches!(err, Error::Parse { offset: 0, .. }));
        let mut rec = vec![0u8; 3073];
        rec[0] = 10;
        assert!(parse_cifar(&rec, CifarVariant::Ten, 0).is_err());
    }
}
