use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use visionseg_core::datasetfmt::{
    build_manifest, write_dataset, DatasetManifest, PageSystems, PieceInfo,
};
use visionseg_core::imaging::{load_gray, load_mask, save_gray_png};
use visionseg_core::metrics::{match_cuts, regions_to_mask, seg_scores, EvalReport, PageReport};
use visionseg_core::neural::{cutnet_segment, NetSpec, SegmentationNet};
use visionseg_core::profileseg::segment_page;
use visionseg_core::synthgen::{generate_corpus, CorpusLayout, CorpusManifest};
use visionseg_core::{BinaryImage, GrayImage, PageSegmentation};

use crate::args::{EvalArgs, FormatArgs, Method, NetspecArgs, SegmentArgs, SynthArgs};
use crate::review::{QueueLayout, ReviewItem, ReviewQueue, Verdict};

/// Invalid combination of command-line arguments.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("malformed JSON in {}", path.display()))
}

fn is_page_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        .unwrap_or(false)
}

/// Page images named by `input`: the file itself, or the images of a
/// directory (its `pages/` subdirectory for a synthetic corpus) by name.
pub fn list_pages(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let corpus_pages = input.join("pages");
    let dir = if corpus_pages.is_dir() {
        corpus_pages
    } else {
        input.to_path_buf()
    };
    let mut pages: Vec<PathBuf> = fs::read_dir(&dir)
        .with_context(|| format!("cannot read input directory {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    pages.retain(|p| p.is_file() && is_page_image(p));
    pages.sort();
    if pages.is_empty() {
        bail!("no PNG or JPEG pages in {}", dir.display());
    }
    Ok(pages)
}

fn page_id(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| anyhow!("cannot derive a page id from {}", path.display()))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SegmentSummary {
    pub pages: usize,
    pub items: usize,
    pub failures: Vec<(PathBuf, String)>,
}

enum Segmenter {
    Threshold,
    Cutnet(Box<SegmentationNet<f64>>),
}

/// Segments every page and writes segmentations, previews and a review queue.
pub fn cmd_segment(args: &SegmentArgs) -> Result<SegmentSummary> {
    let params = args.params();
    params.validate().map_err(|e| UsageError(e.to_string()))?;
    let segmenter = match args.method {
        Method::Threshold => Segmenter::Threshold,
        Method::Cutnet => {
            let path = args.weights.as_ref().ok_or_else(|| {
                UsageError("--method cutnet needs --weights or VISIONSEG_WEIGHTS".into())
            })?;
            let net = SegmentationNet::load(path, NetSpec::default())
                .with_context(|| format!("cannot load weights {}", path.display()))?;
            Segmenter::Cutnet(Box::new(net))
        }
    };

    let pages = list_pages(&args.input)?;
    let mut ids = HashMap::new();
    for p in &pages {
        if let Some(other) = ids.insert(page_id(p)?, p) {
            bail!(
                "pages {} and {} share a page id",
                other.display(),
                p.display()
            );
        }
    }

    let layout = QueueLayout::new(&args.out);
    for dir in ["segmentations", "previews"] {
        let d = args.out.join(dir);
        fs::create_dir_all(&d).with_context(|| format!("cannot create {}", d.display()))?;
    }

    let mut summary = SegmentSummary::default();
    let mut items = Vec::new();
    for path in &pages {
        let result = segment_one(path, &segmenter, &params, &layout);
        match result {
            Ok(mut page_items) => {
                summary.pages += 1;
                items.append(&mut page_items);
            }
            Err(e) if args.keep_going => {
                eprintln!("error: {}: {e:#}", path.display());
                summary.failures.push((path.clone(), format!("{e:#}")));
            }
            Err(e) => return Err(e.context(format!("page {}", path.display()))),
        }
    }
    summary.items = items.len();
    write_json(&layout.queue(), &ReviewQueue { items })?;
    Ok(summary)
}

fn segment_one(
    path: &Path,
    segmenter: &Segmenter,
    params: &visionseg_core::ThresholdParams,
    layout: &QueueLayout,
) -> Result<Vec<ReviewItem>> {
    let id = page_id(path)?;
    let page: GrayImage = load_gray(path)?;
    let mut seg = match segmenter {
        Segmenter::Threshold => segment_page(&page, params)?,
        Segmenter::Cutnet(net) => cutnet_segment(&page, net, params)?,
    };
    let source = path.display().to_string();
    seg.source = source.clone();
    write_json(&layout.segmentation(&id), &seg)?;

    let mut items = Vec::with_capacity(seg.regions.len());
    for region in &seg.regions {
        let rel = QueueLayout::preview_rel(&id, region.order_index);
        let crop = page.crop(
            region.row_start,
            region.row_end,
            region.col_start,
            region.col_end,
        )?;
        save_gray_png(&crop, layout.root.join(&rel))?;
        items.push(ReviewItem {
            item_id: format!("{id}-{:02}", region.order_index),
            page_id: id.clone(),
            image: rel,
            source_page: source.clone(),
            region: *region,
            verdict: Verdict::Pending,
            note: None,
            timestamp: None,
        });
    }
    Ok(items)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<CorpusManifest> {
    generate_corpus(&args.config(), args.count, &args.out)
        .with_context(|| format!("cannot generate corpus in {}", args.out.display()))
}

enum Prediction {
    Segmentation(PageSegmentation),
    Mask(BinaryImage),
}

fn find_prediction(pred: &Path, id: &str) -> Result<Option<Prediction>> {
    for json in [
        pred.join("segmentations").join(format!("{id}.json")),
        pred.join(format!("{id}.json")),
    ] {
        if json.is_file() {
            return Ok(Some(Prediction::Segmentation(read_json(&json)?)));
        }
    }
    for png in [
        pred.join("masks").join(format!("{id}.png")),
        pred.join(format!("{id}.png")),
    ] {
        if png.is_file() {
            return Ok(Some(Prediction::Mask(load_mask(&png)?)));
        }
    }
    Ok(None)
}

/// Scores predictions for every page of a synthetic corpus. Segmentations
/// are also scored on cut placement; mask predictions only pixelwise.
pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let truth = CorpusLayout::new(&args.truth);
    let manifest = truth
        .read_manifest()
        .with_context(|| format!("cannot read corpus manifest in {}", args.truth.display()))?;
    let mut found = Vec::new();
    let mut missing = Vec::new();
    for entry in &manifest.pages {
        match find_prediction(&args.pred, &entry.page_id)? {
            Some(p) => found.push((entry.page_id.clone(), p)),
            None => missing.push(entry.page_id.clone()),
        }
    }
    if !missing.is_empty() {
        bail!(
            "no prediction in {} for {} page(s): {}",
            args.pred.display(),
            missing.len(),
            missing.join(", ")
        );
    }
    let mut pages = Vec::with_capacity(found.len());
    for (id, pred) in found {
        let meta = truth.read_meta(&id)?;
        let truth_mask = load_mask(truth.mask(&id))?;
        let (mask, cuts) = match pred {
            Prediction::Segmentation(seg) => (
                regions_to_mask(&seg, meta.height, meta.width)?,
                Some(match_cuts(&seg.cuts, &meta.placements, args.tolerance)),
            ),
            Prediction::Mask(m) => (m, None),
        };
        let scores = seg_scores(&mask, &truth_mask).with_context(|| format!("page {id}"))?;
        pages.push(PageReport {
            page_id: id,
            scores,
            cuts,
        });
    }
    let report = EvalReport::from_pages(pages);
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(report)
}

/// Piece metadata supplied to `format`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub scenario: String,
    pub pieces: Vec<PieceMetadata>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceMetadata {
    pub piece_id: String,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub author: Option<String>,
    #[serde(default)]
    pub key: Option<String>,
    #[serde(default)]
    pub imslp_page: Option<String>,
    /// Page ids in reading order.
    pub pages: Vec<String>,
}

fn required(piece: &PieceMetadata, field: &str, value: &Option<String>) -> Result<String> {
    match value.as_deref().map(str::trim) {
        Some(v) if !v.is_empty() => Ok(v.to_string()),
        _ => bail!("piece {:?}: missing required field {field}", piece.piece_id),
    }
}

/// Exports accepted systems (or all with `--no-review`) as a dataset.
pub fn cmd_format(args: &FormatArgs) -> Result<DatasetManifest> {
    let meta: Metadata = read_json(&args.metadata)?;
    if meta.scenario.trim().is_empty()
        || meta.scenario.contains(['/', '\\'])
        || meta.scenario == ".."
    {
        bail!("scenario {:?} is not a plain directory name", meta.scenario);
    }
    let layout = QueueLayout::new(&args.queue);
    let items = layout.load_items()?;
    let mut by_page: BTreeMap<&str, Vec<&ReviewItem>> = BTreeMap::new();
    let mut sources: HashMap<String, String> = HashMap::new();
    for item in &items {
        sources.insert(item.page_id.clone(), item.source_page.clone());
        if args.no_review || item.verdict == Verdict::Accepted {
            by_page.entry(&item.page_id).or_default().push(item);
        }
    }

    let mut pages = Vec::new();
    for piece in &meta.pieces {
        let info = PieceInfo {
            piece_id: piece.piece_id.clone(),
            title: required(piece, "title", &piece.title)?,
            author: required(piece, "author", &piece.author)?,
            key: piece.key.clone(),
            imslp_page: piece.imslp_page.clone(),
        };
        for page in &piece.pages {
            if !layout.segmentation(page).is_file() {
                bail!(
                    "piece {:?}: page {page:?} was not segmented in {}",
                    piece.piece_id,
                    args.queue.display()
                );
            }
            let regions = by_page
                .get(page.as_str())
                .map(|items| items.iter().map(|it| it.region).collect())
                .unwrap_or_default();
            pages.push(PageSystems {
                piece: info.clone(),
                source_page: page.clone(),
                regions,
            });
        }
    }
    let manifest = build_manifest(&meta.scenario, &pages)?;
    write_dataset(&manifest, &args.out, |page_id| {
        let source = sources.get(page_id).cloned().unwrap_or_default();
        load_gray::<f64>(&source)
    })?;
    Ok(manifest)
}

pub fn cmd_netspec(args: &NetspecArgs) -> Result<String> {
    let mut json = NetSpec::default().to_json()?;
    json.push('\n');
    if let Some(out) = &args.out {
        fs::write(out, &json).with_context(|| format!("cannot write {}", out.display()))?;
    }
    Ok(json)
}
