//! Numbered-PNG datasets and the built-in synthetic set.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hexsr_core::image::RasterImage;
use hexsr_core::io::read_png;
use hexsr_core::synthetic::SyntheticImage;
use serde::{Deserialize, Serialize};

use crate::config::SyntheticData;
use crate::error::{Error, Result};

/// Inclusive id ranges `[first, last]` of the three splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSplit {
    pub train: [u32; 2],
    pub val: [u32; 2],
    pub test: [u32; 2],
}

impl Default for DatasetSplit {
    fn default() -> Self {
        Self {
            train: [1, 800],
            val: [801, 810],
            test: [811, 900],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl DatasetSplit {
    fn ranges(&self) -> [(Split, [u32; 2]); 3] {
        [(Split::Train, self.train), (Split::Val, self.val), (Split::Test, self.test)]
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.ranges();
        for (s, [a, b]) in r {
            if a > b {
                return Err(Error::Config(format!("{s:?} split range [{a}, {b}] is empty")));
            }
        }
        for i in 0..3 {
            for j in i + 1..3 {
                let ([a0, a1], [b0, b1]) = (r[i].1, r[j].1);
                if a0 <= b1 && b0 <= a1 {
                    return Err(Error::Config(format!(
                        "{:?} [{a0}, {a1}] and {:?} [{b0}, {b1}] splits overlap",
                        r[i].0, r[j].0
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn split_of(&self, id: u32) -> Option<Split> {
        self.ranges().into_iter().find(|(_, [a, b])| (*a..=*b).contains(&id)).map(|(s, _)| s)
    }
}

/// A lazily loaded HR image.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    File { id: u32, path: PathBuf },
    Synthetic { id: u32, image: SyntheticImage, size: usize },
}

impl ImageSource {
    /// Unique across all splits; also selects the noise stream.
    pub fn id(&self) -> u32 {
        match self {
            Self::File { id, .. } | Self::Synthetic { id, .. } => *id,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::File { path, .. } => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            Self::Synthetic { id, image, .. } => format!("{}_{id:03}", image.name()),
        }
    }

    pub fn load(&self, pitch: f64) -> Result<RasterImage> {
        match self {
            Self::File { path, .. } => Ok(read_png(path, pitch)?),
            Self::Synthetic { image, size, .. } => Ok(image.render(*size, *size, pitch)?),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub train: Vec<ImageSource>,
    pub val: Vec<ImageSource>,
    pub test: Vec<ImageSource>,
}

fn numeric_id(path: &Path) -> Option<u32> {
    let ext = path.extension()?.to_str()?;
    if !ext.eq_ignore_ascii_case("png") {
        return None;
    }
    path.file_stem()?.to_str()?.parse().ok()
}

/// Partitions the numbered PNG files of `dir` (`0001.png`, ...) by `split`.
/// Every id of every range must be present; numbered files outside all
/// ranges are rejected.
pub fn ingest_dataset(dir: &Path, split: &DatasetSplit) -> Result<Dataset> {
    split.validate()?;
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if let Some(id) = numeric_id(&path) {
            if split.split_of(id).is_none() {
                return Err(Error::Dataset(format!("{} has id {id} outside every split", path.display())));
            }
            if let Some(prev) = found.insert(id, path.clone()) {
                return Err(Error::Dataset(format!(
                    "id {id} appears twice: {} and {}",
                    prev.display(),
                    path.display()
                )));
            }
        }
    }
    let mut ds = Dataset::default();
    for (s, [a, b]) in split.ranges() {
        let list = match s {
            Split::Train => &mut ds.train,
            Split::Val => &mut ds.val,
            Split::Test => &mut ds.test,
        };
        for id in a..=b {
            let path = found.get(&id).ok_or_else(|| Error::MissingFile {
                id,
                dir: dir.to_path_buf(),
            })?;
            list.push(ImageSource::File { id, path: path.clone() });
        }
    }
    Ok(ds)
}

/// Random textures for training and validation, the configured test images
/// for testing. Ids run consecutively across the three splits.
pub fn synthetic_dataset(cfg: &SyntheticData) -> Dataset {
    let texture = |id: u32| ImageSource::Synthetic {
        id,
        image: SyntheticImage::Texture {
            seed: u64::from(id),
            components: cfg.texture_components,
            f_max: cfg.texture_f_max,
        },
        size: cfg.size,
    };
    let (nt, nv) = (cfg.train as u32, cfg.val as u32);
    Dataset {
        train: (1..=nt).map(texture).collect(),
        val: (nt + 1..=nt + nv).map(texture).collect(),
        test: cfg
            .test
            .iter()
            .enumerate()
            .map(|(i, image)| ImageSource::Synthetic {
                id: nt + nv + 1 + i as u32,
                image: image.clone(),
                size: cfg.size,
            })
            .collect(),
    }
}

/// The dataset an experiment runs on: `root` if given, else the configured
/// root, else the synthetic set. The flag reports the synthetic fallback.
pub fn resolve_dataset(cfg: &crate::config::DataConfig, root: Option<&Path>) -> Result<(Dataset, bool)> {
    match root.or(cfg.root.as_deref()) {
        Some(dir) => Ok((ingest_dataset(dir, &cfg.split)?, false)),
        None => Ok((synthetic_dataset(&cfg.synthetic), true)),
    }
}
