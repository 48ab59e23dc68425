//! Dataset manifests: class names, a display palette, and image/label pairs.
//!
//! A manifest is a small text file:
//!
//! ```text
//! classes top mid left right
//! palette 135,180,235 60,140,60 200,80,80 250,220,90
//! pair images/0000.ppm labels/0000.txt
//! ```
//!
//! Relative pair paths resolve against the manifest's directory. Labels are
//! text grids, one image row per line, `-1` marking void pixels.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::raster::{LabelMap, RasterImage};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub class_names: Vec<String>,
    pub palette: Vec<[u8; 3]>,
    /// Image/label path pairs, already resolved.
    pub pairs: Vec<(PathBuf, PathBuf)>,
}

impl DatasetManifest {
    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }
}

pub(crate) fn format_palette(palette: &[[u8; 3]]) -> String {
    palette
        .iter()
        .map(|c| format!("{},{},{}", c[0], c[1], c[2]))
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn parse_palette_token(token: &str) -> Option<[u8; 3]> {
    let parts: Vec<&str> = token.split(',').collect();
    if parts.len() != 3 {
        return None;
    }
    let mut color = [0u8; 3];
    for (slot, part) in color.iter_mut().zip(&parts) {
        *slot = part.trim().parse().ok()?;
    }
    Some(color)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut class_names: Vec<String> = Vec::new();
    let mut palette: Vec<[u8; 3]> = Vec::new();
    let mut pairs: Vec<(PathBuf, PathBuf)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().unwrap();
        match keyword {
            "classes" => class_names = tokens.map(str::to_string).collect(),
            "palette" => {
                palette = tokens
                    .map(|t| {
                        parse_palette_token(t)
                            .ok_or_else(|| Error::parse(path, idx + 1, "bad palette color"))
                    })
                    .collect::<Result<_>>()?;
            }
            "pair" => {
                let image = tokens
                    .next()
                    .ok_or_else(|| Error::parse(path, idx + 1, "pair needs image and label"))?;
                let label = tokens
                    .next()
                    .ok_or_else(|| Error::parse(path, idx + 1, "pair needs image and label"))?;
                pairs.push((base.join(image), base.join(label)));
            }
            _ => {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!("unknown manifest keyword '{keyword}'"),
                ));
            }
        }
    }
    if class_names.is_empty() {
        return Err(Error::parse(path, 1, "manifest declares no classes"));
    }
    if palette.len() != class_names.len() {
        return Err(Error::parse(
            path,
            1,
            format!(
                "palette has {} colors for {} classes",
                palette.len(),
                class_names.len()
            ),
        ));
    }
    if pairs.is_empty() {
        return Err(Error::insufficient_data(format!(
            "{}: manifest lists no image/label pairs",
            path.display()
        )));
    }
    Ok(DatasetManifest {
        class_names,
        palette,
        pairs,
    })
}

/// Writes a manifest; `pairs` are recorded verbatim (use relative paths to
/// keep the dataset relocatable).
pub fn write_manifest(
    path: impl AsRef<Path>,
    class_names: &[String],
    palette: &[[u8; 3]],
    pairs: &[(String, String)],
) -> Result<()> {
    let path = path.as_ref();
    let mut writer = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let io = |e| Error::io(path, e);
    writeln!(writer, "classes {}", class_names.join(" ")).map_err(io)?;
    writeln!(writer, "palette {}", format_palette(palette)).map_err(io)?;
    for (image, label) in pairs {
        writeln!(writer, "pair {image} {label}").map_err(io)?;
    }
    writer.flush().map_err(io)
}

/// All rasters and label grids of a manifest, loaded and cross-checked.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub images: Vec<RasterImage>,
    pub labels: Vec<LabelMap>,
}

pub fn load_dataset(manifest: &DatasetManifest) -> Result<LoadedDataset> {
    let mut images = Vec::with_capacity(manifest.pairs.len());
    let mut labels = Vec::with_capacity(manifest.pairs.len());
    for (image_path, label_path) in &manifest.pairs {
        let image = RasterImage::read(image_path)?;
        let label = LabelMap::read(label_path, manifest.class_count())?;
        if image.width() != label.width() || image.height() != label.height() {
            return Err(Error::invalid_input(format!(
                "{} is {}x{} but {} is {}x{}",
                image_path.display(),
                image.width(),
                image.height(),
                label_path.display(),
                label.width(),
                label.height()
            )));
        }
        images.push(image);
        labels.push(label);
    }
    Ok(LoadedDataset { images, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::VOID;

    fn write_pair(dir: &Path, stem: &str, width: usize, height: usize) {
        let image = RasterImage::filled(width, height, [10, 20, 30]).unwrap();
        image.write(dir.join(format!("{stem}.ppm"))).unwrap();
        let labels = LabelMap::from_labels(width, height, vec![0; width * height], 2).unwrap();
        labels.write(dir.join(format!("{stem}.txt"))).unwrap();
    }

    fn write_manifest_text(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("manifest.txt");
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn well_formed_manifest_loads_pairs() {
        let dir = tempfile::tempdir().unwrap();
        write_pair(dir.path(), "a", 8, 6);
        write_pair(dir.path(), "b", 8, 6);
        let path = write_manifest_text(
            dir.path(),
            "# two scenes\nclasses sky ground\npalette 1,2,3 4,5,6\npair a.ppm a.txt\npair b.ppm b.txt\n",
        );
        let manifest = read_manifest(&path).unwrap();
        assert_eq!(manifest.class_count(), 2);
        assert_eq!(manifest.palette[1], [4, 5, 6]);
        let data = load_dataset(&manifest).unwrap();
        assert_eq!(data.images.len(), 2);
        assert_eq!(data.labels.len(), 2);
    }

    #[test]
    fn dimension_mismatch_names_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let image = RasterImage::filled(10, 10, [0, 0, 0]).unwrap();
        image.write(dir.path().join("img.ppm")).unwrap();
        let labels = LabelMap::from_labels(10, 12, vec![0; 120], 2).unwrap();
        labels.write(dir.path().join("img.txt")).unwrap();
        let path = write_manifest_text(
            dir.path(),
            "classes a b\npalette 0,0,0 9,9,9\npair img.ppm img.txt\n",
        );
        let err = load_dataset(&read_manifest(&path).unwrap()).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("img.ppm") && message.contains("img.txt"), "{message}");
        assert!(message.contains("10x10") && message.contains("10x12"));
    }

    #[test]
    fn out_of_range_class_id_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let image = RasterImage::filled(2, 2, [0, 0, 0]).unwrap();
        image.write(dir.path().join("img.ppm")).unwrap();
        std::fs::write(dir.path().join("img.txt"), "0 1\n2 0\n").unwrap();
        let path = write_manifest_text(
            dir.path(),
            "classes a b\npalette 0,0,0 9,9,9\npair img.ppm img.txt\n",
        );
        assert!(load_dataset(&read_manifest(&path).unwrap()).is_err());
    }

    #[test]
    fn void_labels_pass_range_checks() {
        let dir = tempfile::tempdir().unwrap();
        let image = RasterImage::filled(2, 1, [0, 0, 0]).unwrap();
        image.write(dir.path().join("img.ppm")).unwrap();
        std::fs::write(dir.path().join("img.txt"), "-1 1\n").unwrap();
        let path = write_manifest_text(
            dir.path(),
            "classes a b\npalette 0,0,0 9,9,9\npair img.ppm img.txt\n",
        );
        let data = load_dataset(&read_manifest(&path).unwrap()).unwrap();
        assert_eq!(data.labels[0].get(0, 0), VOID);
    }

    #[test]
    fn manifest_validation_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_manifest_text(dir.path(), "palette 0,0,0\n");
        assert!(read_manifest(&path).is_err());
        let path = write_manifest_text(dir.path(), "classes a b\npalette 0,0,0\npair x y\n");
        assert!(read_manifest(&path).is_err());
        let path = write_manifest_text(dir.path(), "classes a\npalette 0,0,0\n");
        assert!(matches!(
            read_manifest(&path),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn write_then_read_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        write_pair(dir.path(), "x", 4, 4);
        let path = dir.path().join("manifest.txt");
        write_manifest(
            &path,
            &["sky".into(), "sea".into()],
            &[[1, 2, 3], [4, 5, 6]],
            &[("x.ppm".into(), "x.txt".into())],
        )
        .unwrap();
        let manifest = read_manifest(&path).unwrap();
        assert_eq!(manifest.class_names, vec!["sky", "sea"]);
        assert_eq!(manifest.pairs.len(), 1);
        load_dataset(&manifest).unwrap();
    }
}
