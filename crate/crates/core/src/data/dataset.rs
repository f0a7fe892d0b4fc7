//! Dataset construction, the manifest format, and loading.
//!
//! Manifest: UTF-8 text. Lines starting with `#` are header lines of the form
//! `# key value`; the first non-header line is the column header
//! `id category split low high corrupted corruption` (tab-separated), followed
//! by one tab-separated record per sample. Paths are relative to the
//! manifest's directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::voxel::{apply_rotation, grid_center, pca_align, read_grid, write_grid, VoxelGrid};

use super::{generate_shape, Category, CorruptionSpec, DataError, ShapeRecipe};

pub const MANIFEST_NAME: &str = "manifest.tsv";
pub const MANIFEST_VERSION: &str = "shape-inpaint manifest v1";
const COLUMNS: &str = "id\tcategory\tsplit\tlow\thigh\tcorrupted\tcorruption";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(DataError::Parse(format!("bad split {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub n: usize,
    pub categories: Vec<Category>,
    pub d_l: usize,
    pub d_h: usize,
    pub corruption: CorruptionSpec,
    /// Drives recipe seeds and the train/test split.
    pub seed: u64,
}

/// One aligned training example.
#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    pub category: Category,
    pub split: Split,
    pub recipe_seed: u64,
    /// Clean low-resolution grid, PCA-aligned.
    pub low: VoxelGrid,
    /// Clean high-resolution grid under the same alignment.
    pub high: VoxelGrid,
    /// Corrupted low-resolution input.
    pub corrupted: VoxelGrid,
    pub corruption: CorruptionSpec,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub d_l: usize,
    pub d_h: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Sample> + '_ {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn train(&self) -> Vec<&Sample> {
        self.split(Split::Train).collect()
    }

    pub fn test(&self) -> Vec<&Sample> {
        self.split(Split::Test).collect()
    }

    /// Reads a manifest and every grid it references.
    pub fn load(manifest: impl AsRef<Path>) -> Result<Dataset, DataError> {
        let manifest = manifest.as_ref();
        let text = fs::read_to_string(manifest).map_err(|e| DataError::io(manifest, e))?;
        let root = manifest.parent().unwrap_or(Path::new("."));
        let parsed = Manifest::parse(&text)?;
        let mut samples = Vec::with_capacity(parsed.records.len());
        for r in parsed.records {
            let load = |rel: &Path, d: usize| -> Result<VoxelGrid, DataError> {
                let g = read_grid(root.join(rel))?;
                if g.resolution() != d {
                    return Err(DataError::Parse(format!(
                        "{}: resolution {} but manifest declares {d}",
                        rel.display(),
                        g.resolution()
                    )));
                }
                Ok(g)
            };
            samples.push(Sample {
                low: load(&r.low, parsed.d_l)?,
                high: load(&r.high, parsed.d_h)?,
                corrupted: load(&r.corrupted, parsed.d_l)?,
                id: r.id,
                category: r.category,
                split: r.split,
                recipe_seed: r.recipe_seed,
                corruption: r.corruption,
            });
        }
        Ok(Dataset {
            d_l: parsed.d_l,
            d_h: parsed.d_h,
            samples,
        })
    }
}

/// Parsed manifest contents.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub d_l: usize,
    pub d_h: usize,
    pub records: Vec<ManifestRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRecord {
    pub id: String,
    pub category: Category,
    pub split: Split,
    pub recipe_seed: u64,
    pub low: PathBuf,
    pub high: PathBuf,
    pub corrupted: PathBuf,
    pub corruption: CorruptionSpec,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Manifest, DataError> {
        let mut d_l = None;
        let mut d_h = None;
        let mut records = Vec::new();
        let mut seen_columns = false;
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let err = |m: String| DataError::Parse(format!("manifest line {line_no}: {m}"));
            if let Some(header) = line.strip_prefix('#') {
                let mut parts = header.trim().splitn(2, ' ');
                let key = parts.next().unwrap_or("");
                let value = parts.next().unwrap_or("").trim();
                match key {
                    "d_l" => d_l = Some(value.parse().map_err(|_| err(format!("bad d_l {value:?}")))?),
                    "d_h" => d_h = Some(value.parse().map_err(|_| err(format!("bad d_h {value:?}")))?),
                    _ => {}
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if !seen_columns {
                if line != COLUMNS {
                    return Err(err(format!("expected column header, got {line:?}")));
                }
                seen_columns = true;
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 7 {
                return Err(err(format!("expected 7 fields, got {}", f.len())));
            }
            let recipe_seed = f[0]
                .rsplit('-')
                .next()
                .and_then(|s| u64::from_str_radix(s, 16).ok())
                .ok_or_else(|| err(format!("bad id {:?}", f[0])))?;
            records.push(ManifestRecord {
                id: f[0].to_string(),
                category: f[1].parse()?,
                split: f[2].parse()?,
                recipe_seed,
                low: PathBuf::from(f[3]),
                high: PathBuf::from(f[4]),
                corrupted: PathBuf::from(f[5]),
                corruption: f[6].parse()?,
            });
        }
        match (d_l, d_h) {
            (Some(d_l), Some(d_h)) => Ok(Manifest { d_l, d_h, records }),
            _ => Err(DataError::Parse("manifest header lacks d_l or d_h".into())),
        }
    }
}

fn split_key(recipe_seed: u64) -> u64 {
    ChaCha8Rng::seed_from_u64(recipe_seed ^ 0x9e37_79b9_7f4a_7c15).next_u64()
}

/// Generates every sample in memory: shapes, alignment, corruption, split.
pub fn generate_samples(spec: &DatasetSpec) -> Result<Vec<Sample>, DataError> {
    if spec.n < 5 {
        return Err(DataError::Contract(format!("need at least 5 samples, got {}", spec.n)));
    }
    if spec.categories.is_empty() {
        return Err(DataError::Contract("no categories given".into()));
    }
    if spec.d_h % spec.d_l != 0 {
        return Err(DataError::Contract(format!("d_h {} is not a multiple of d_l {}", spec.d_h, spec.d_l)));
    }
    let ratio = (spec.d_h / spec.d_l) as f64;
    let mut master = ChaCha8Rng::seed_from_u64(spec.seed);
    let seeds: Vec<u64> = (0..spec.n).map(|_| master.next_u64()).collect();

    let mut order: Vec<usize> = (0..spec.n).collect();
    order.sort_by_key(|&k| (split_key(seeds[k]), k));
    let n_test = (spec.n + 2) / 5;
    let mut split = vec![Split::Train; spec.n];
    for &k in &order[..n_test] {
        split[k] = Split::Test;
    }

    let mut samples = Vec::with_capacity(spec.n);
    for (k, &seed) in seeds.iter().enumerate() {
        let category = spec.categories[k % spec.categories.len()];
        let recipe = ShapeRecipe::sample(category, seed);
        let low = generate_shape(&recipe, spec.d_l)?;
        let high = generate_shape(&recipe, spec.d_h)?;
        let aligned = pca_align(&low)?;
        let high_pivot = aligned.pivot * ratio;
        let mut high = apply_rotation(&high, &aligned.rotation, &high_pivot, &grid_center(spec.d_h));
        high.set_meta(aligned.grid.meta().map(str::to_string));
        let corruption = spec.corruption.for_sample(seed);
        let corrupted = corruption.apply(&aligned.grid);
        samples.push(Sample {
            id: format!("{category}-{seed:016x}"),
            category,
            split: split[k],
            recipe_seed: seed,
            low: aligned.grid,
            high,
            corrupted,
            corruption,
        });
    }
    Ok(samples)
}

/// Writes every sample's grids under `out_dir/grids` and the manifest to
/// `out_dir/manifest.tsv`; returns the manifest path.
pub fn build_dataset(spec: &DatasetSpec, out_dir: impl AsRef<Path>) -> Result<PathBuf, DataError> {
    let out_dir = out_dir.as_ref();
    let grids = out_dir.join("grids");
    fs::create_dir_all(&grids).map_err(|e| DataError::io(&grids, e))?;
    let samples = generate_samples(spec)?;

    let mut text = format!("# {MANIFEST_VERSION}\n");
    text.push_str(&format!("# d_l {}\n# d_h {}\n", spec.d_l, spec.d_h));
    text.push_str(&format!("# n {}\n# seed {}\n# corruption {}\n", spec.n, spec.seed, spec.corruption));
    for c in &spec.categories {
        text.push_str(&format!("# range {c} {}\n", c.ranges()));
    }
    text.push_str(COLUMNS);
    text.push('\n');
    for s in &samples {
        let rel = |kind: &str| format!("grids/{}.{kind}.voxg", s.id);
        let (low, high, corrupted) = (rel("low"), rel("high"), rel("corrupted"));
        write_grid(out_dir.join(&low), &s.low)?;
        write_grid(out_dir.join(&high), &s.high)?;
        write_grid(out_dir.join(&corrupted), &s.corrupted)?;
        text.push_str(&format!(
            "{}\t{}\t{}\t{low}\t{high}\t{corrupted}\t{}\n",
            s.id, s.category, s.split, s.corruption
        ));
    }
    let path = out_dir.join(MANIFEST_NAME);
    fs::write(&path, text).map_err(|e| DataError::io(&path, e))?;
    Ok(path)
}

/// In-memory dataset with the same content [`build_dataset`] would write.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset, DataError> {
    Ok(Dataset {
        d_l: spec.d_l,
        d_h: spec.d_h,
        samples: generate_samples(spec)?,
    })
}
