//! Packaging of segmented systems as fixed-size grayscale JPEG samples with
//! an ordered manifest.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use image::codecs::jpeg::JpegEncoder;
use image::ExtendedColorType;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::imaging::{resize_bilinear, Image};
use crate::profileseg::SystemRegion;
use crate::scalar::Scalar;
use crate::synthgen::write_json;

pub const SAMPLE_HEIGHT: usize = 128;
pub const SAMPLE_WIDTH: usize = 512;
pub const JPEG_QUALITY: u8 = 90;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Metadata stored with every sample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub title: String,
    pub author: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imslp_page: Option<String>,
    pub source_page: String,
    /// Position among the retained systems of the piece, from 1.
    pub system_number: usize,
    pub order_within_page: usize,
}

/// Descriptive fields shared by all pages of a piece.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceInfo {
    pub piece_id: String,
    pub title: String,
    pub author: String,
    #[serde(default)]
    pub key: Option<String>,
    #[serde(default)]
    pub imslp_page: Option<String>,
}

/// Retained systems of one page.
#[derive(Clone, Debug, PartialEq)]
pub struct PageSystems {
    pub piece: PieceInfo,
    pub source_page: String,
    pub regions: Vec<SystemRegion>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Sample path relative to the scenario directory.
    pub file: String,
    pub piece_id: String,
    pub region: SystemRegion,
    #[serde(flatten)]
    pub meta: SampleMeta,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub scenario: String,
    pub sample_count: usize,
    pub piece_count: usize,
    pub samples: Vec<ManifestEntry>,
}

/// Crops `region` and resizes it to the sample size.
pub fn sample_image<T: Scalar>(page: &Image<T>, region: &SystemRegion) -> Result<Image<T>> {
    let crop = page.crop(
        region.row_start,
        region.row_end,
        region.col_start,
        region.col_end,
    )?;
    resize_bilinear(&crop, SAMPLE_HEIGHT, SAMPLE_WIDTH)
}

/// Encodes an image as 8-bit grayscale JPEG at the fixed quality.
pub fn encode_jpeg<T: Scalar>(img: &Image<T>) -> Result<Vec<u8>> {
    let buf = img.to_luma8();
    let mut out = Vec::new();
    JpegEncoder::new_with_quality(&mut out, JPEG_QUALITY)
        .encode(
            buf.as_raw(),
            buf.width(),
            buf.height(),
            ExtendedColorType::L8,
        )
        .map_err(Error::Encode)?;
    Ok(out)
}

/// Writes one system of `page` as a sample JPEG.
pub fn export_system<T: Scalar>(
    page: &Image<T>,
    region: &SystemRegion,
    out: impl AsRef<Path>,
) -> Result<()> {
    let out = out.as_ref();
    let bytes = encode_jpeg(&sample_image(page, region)?)?;
    fs::write(out, bytes).map_err(io_err(out))
}

fn check_piece_id(id: &str) -> Result<()> {
    if id.is_empty() || id == "." || id == ".." || id.contains(['/', '\\']) {
        return Err(Error::InvalidParameter(format!(
            "piece id {id:?} is not a plain file name"
        )));
    }
    Ok(())
}

/// Numbers retained systems per piece and orders them by piece (first
/// appearance), page (input order) and position on the page.
pub fn build_manifest(scenario: &str, pages: &[PageSystems]) -> Result<DatasetManifest> {
    let mut pieces: Vec<&str> = Vec::new();
    for p in pages {
        check_piece_id(&p.piece.piece_id)?;
        if !pieces.contains(&p.piece.piece_id.as_str()) {
            pieces.push(&p.piece.piece_id);
        }
    }
    let mut samples = Vec::new();
    let mut files = HashSet::new();
    let mut seen_regions = HashSet::new();
    for piece_id in &pieces {
        let mut number = 0;
        for page in pages.iter().filter(|p| p.piece.piece_id == *piece_id) {
            let mut regions = page.regions.clone();
            regions.sort_by_key(|r| r.order_index);
            for region in regions {
                if !seen_regions.insert((page.source_page.clone(), region.order_index)) {
                    return Err(Error::DuplicateSample(format!(
                        "{} system {}",
                        page.source_page, region.order_index
                    )));
                }
                number += 1;
                let file = format!("{piece_id}/{number:04}.jpg");
                if !files.insert(file.clone()) {
                    return Err(Error::DuplicateSample(file));
                }
                samples.push(ManifestEntry {
                    file,
                    piece_id: piece_id.to_string(),
                    region,
                    meta: SampleMeta {
                        title: page.piece.title.clone(),
                        author: page.piece.author.clone(),
                        key: page.piece.key.clone(),
                        imslp_page: page.piece.imslp_page.clone(),
                        source_page: page.source_page.clone(),
                        system_number: number,
                        order_within_page: region.order_index,
                    },
                });
            }
        }
    }
    Ok(DatasetManifest {
        scenario: scenario.to_string(),
        sample_count: samples.len(),
        piece_count: pieces.len(),
        samples,
    })
}

/// Exports every sample of `manifest` under `out/{scenario}` and writes the
/// manifest next to them. `load_page` maps a source page id to its image.
pub fn write_dataset<T: Scalar>(
    manifest: &DatasetManifest,
    out: impl AsRef<Path>,
    mut load_page: impl FnMut(&str) -> Result<Image<T>>,
) -> Result<PathBuf> {
    let root = out.as_ref().join(&manifest.scenario);
    fs::create_dir_all(&root).map_err(io_err(&root))?;
    let mut cached: Option<(String, Image<T>)> = None;
    for entry in &manifest.samples {
        let source = &entry.meta.source_page;
        if cached.as_ref().map(|(id, _)| id != source).unwrap_or(true) {
            cached = Some((source.clone(), load_page(source)?));
        }
        let page = &cached.as_ref().unwrap().1;
        let path = root.join(&entry.file);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        export_system(page, &entry.region, &path)?;
    }
    let path = root.join(MANIFEST_FILE);
    write_json(&path, manifest)?;
    Ok(path)
}
