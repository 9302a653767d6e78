//! Artificial score pages with exact ground truth.
//!
//! Pages are stacks of system images separated by random gaps. The mask marks
//! the bounding box of every placed system, so the row profile of the mask is
//! the step target the refinement network is trained towards.
//!
//! All randomness comes from one seed. A corpus derives an independent stream
//! per page index from the corpus seed, so any page can be regenerated alone.

use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::imaging::{self, BinaryImage, Image};
use crate::profileseg::RowProfile;
use crate::scalar::Scalar;

/// Distance between adjacent stave lines of rendered systems.
pub const STAFF_LINE_SPACING: usize = 9;
pub const MIN_SYSTEM_WIDTH: usize = 64;

/// Rows and columns a system occupies on a page; both intervals half-open.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub system_id: String,
    pub row_start: usize,
    pub row_end: usize,
    pub col_start: usize,
    pub col_end: usize,
}

impl Placement {
    pub fn area(&self) -> usize {
        (self.row_end - self.row_start) * (self.col_end - self.col_start)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub page_height: usize,
    pub page_width: usize,
    pub min_systems: usize,
    pub max_systems: usize,
    pub min_gap: usize,
    pub max_gap: usize,
    pub margin: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            page_height: 1024,
            page_width: 768,
            min_systems: 2,
            max_systems: 5,
            min_gap: 30,
            max_gap: 90,
            margin: 40,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.min_systems == 0 || self.min_systems > self.max_systems {
            return bad(format!(
                "system count range [{}, {}] is empty or starts at zero",
                self.min_systems, self.max_systems
            ));
        }
        if self.min_gap == 0 || self.min_gap > self.max_gap {
            return bad(format!(
                "gap range [{}, {}] must be non-empty and at least one row",
                self.min_gap, self.max_gap
            ));
        }
        if 2 * self.margin >= self.page_width || 2 * self.margin >= self.page_height {
            return bad(format!(
                "margin {} leaves no room on a {}x{} page",
                self.margin, self.page_height, self.page_width
            ));
        }
        Ok(())
    }

    /// Width every system is scaled to.
    pub fn content_width(&self) -> usize {
        self.page_width - 2 * self.margin
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthPage<T> {
    pub page_id: String,
    pub seed: u64,
    pub image: Image<T>,
    pub mask: BinaryImage,
    pub placements: Vec<Placement>,
}

impl<T: Scalar> SynthPage<T> {
    /// Gap intervals `[prev.row_end, next.row_start)` between consecutive systems.
    pub fn gaps(&self) -> Vec<(usize, usize)> {
        placement_gaps(&self.placements)
    }

    pub fn meta(&self) -> PageMeta {
        PageMeta {
            page_id: self.page_id.clone(),
            seed: self.seed,
            height: self.image.height(),
            width: self.image.width(),
            placements: self.placements.clone(),
        }
    }
}

pub fn placement_gaps(placements: &[Placement]) -> Vec<(usize, usize)> {
    placements
        .windows(2)
        .map(|w| (w[0].row_end, w[1].row_start))
        .collect()
}

/// Per-page ground-truth record, stored as `meta/{id}.json`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageMeta {
    pub page_id: String,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub placements: Vec<Placement>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub page_id: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub config: SynthConfig,
    pub pages: Vec<CorpusEntry>,
}

/// A rendered system together with the rows of its ten stave lines.
#[derive(Clone, Debug)]
pub struct FakeSystem<T> {
    pub image: Image<T>,
    pub staff_lines: Vec<usize>,
}

struct Canvas {
    height: usize,
    width: usize,
    ink: Vec<bool>,
}

impl Canvas {
    fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            ink: vec![false; height * width],
        }
    }

    fn dot(&mut self, r: isize, c: isize) {
        if r >= 0 && c >= 0 && (r as usize) < self.height && (c as usize) < self.width {
            self.ink[r as usize * self.width + c as usize] = true;
        }
    }

    fn hline(&mut self, r: isize, c0: isize, c1: isize) {
        for c in c0..c1 {
            self.dot(r, c);
        }
    }

    fn vline(&mut self, c: isize, r0: isize, r1: isize) {
        for r in r0..r1 {
            self.dot(r, c);
        }
    }

    fn ellipse(&mut self, cy: isize, cx: isize, ry: f64, rx: f64, filled: bool) {
        let (ry_i, rx_i) = (ry.ceil() as isize, rx.ceil() as isize);
        for dy in -ry_i..=ry_i {
            for dx in -rx_i..=rx_i {
                let d = (dy as f64 / ry).powi(2) + (dx as f64 / rx).powi(2);
                let inner = ((dy as f64 / (ry - 1.3).max(0.5)).powi(2)
                    + (dx as f64 / (rx - 1.3).max(0.5)).powi(2))
                    > 1.0;
                if d <= 1.0 && (filled || inner) {
                    self.dot(cy + dy, cx + dx);
                }
            }
        }
    }

    fn into_image<T: Scalar>(self) -> Image<T> {
        let data = self
            .ink
            .iter()
            .map(|&i| if i { T::zero() } else { T::one() })
            .collect();
        Image::from_raw(self.height, self.width, data)
    }
}

/// Renders a stave-like piano system: two five-line staves with clefs,
/// barlines through both staves, and seeded note heads with stems and ledger
/// lines. Ink is `0.0` on a `1.0` background.
pub fn render_fake_system<T: Scalar>(width: usize, seed: u64) -> Result<Image<T>> {
    Ok(render_fake_system_layout(width, seed)?.image)
}

pub fn render_fake_system_layout<T: Scalar>(width: usize, seed: u64) -> Result<FakeSystem<T>> {
    if width < MIN_SYSTEM_WIDTH {
        return Err(Error::InvalidParameter(format!(
            "system width {width} below minimum {MIN_SYSTEM_WIDTH}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = STAFF_LINE_SPACING as isize;
    let pad = rng.gen_range(8..=16) as isize;
    let intra_gap = rng.gen_range(18..=22) as isize;
    let upper_top = pad;
    let lower_top = upper_top + 4 * s + intra_gap;
    let height = (lower_top + 4 * s + 1 + pad) as usize;
    let w = width as isize;
    let mut canvas = Canvas::new(height, width);

    let mut staff_lines = Vec::with_capacity(10);
    for top in [upper_top, lower_top] {
        for k in 0..5 {
            let r = top + k * s;
            canvas.hline(r, 0, w);
            staff_lines.push(r as usize);
        }
    }

    let system_bottom = lower_top + 4 * s + 1;
    let measures = rng.gen_range(2..=5) as isize;
    let body_start = 28.min(w / 4);
    let measure_width = (w - body_start) / measures;
    canvas.vline(0, upper_top, system_bottom);
    for m in 1..=measures {
        let c = if m == measures {
            w - 1
        } else {
            body_start + m * measure_width
        };
        canvas.vline(c, upper_top, system_bottom);
    }

    for top in [upper_top, lower_top] {
        // clef
        canvas.ellipse(top + 2 * s, 10.min(w / 8), 2.2 * s as f64, 4.0, false);
        canvas.vline(12.min(w / 8), top - s / 2, top + 4 * s + s / 2);

        for m in 0..measures {
            let x0 = body_start + m * measure_width;
            let notes = rng.gen_range(2..=6) as isize;
            let step = measure_width / (notes + 1);
            for k in 1..=notes {
                let cx = x0 + k * step + rng.gen_range(-2..=2);
                if cx < body_start + 4 || cx > w - 8 {
                    continue;
                }
                // Staff position in half spaces from the top line; -2 and 10
                // sit on ledger lines above and below.
                let pos = rng.gen_range(-2..=10) as isize;
                let cy = top + pos * s / 2;
                let filled = rng.gen_bool(0.8);
                canvas.ellipse(cy, cx, s as f64 / 2.0, s as f64 / 2.0 + 1.5, filled);
                if pos == -2 || pos == 10 {
                    canvas.hline(cy, cx - 8, cx + 9);
                }
                let stem = 7 * s / 2;
                if pos < 4 {
                    canvas.vline(cx - s / 2 - 1, cy, cy + stem);
                } else {
                    canvas.vline(cx + s / 2 + 1, cy - stem, cy + 1);
                }
            }
        }
    }

    Ok(FakeSystem {
        image: canvas.into_image(),
        staff_lines,
    })
}

/// Stacks randomly drawn systems into a page.
///
/// Draws the system count uniformly from the configured range, samples that
/// many systems with replacement, scales each to the content width (height
/// kept) and separates them by uniform random gaps, starting below the top
/// margin. When the stack overflows the page the last system is dropped until
/// it fits; a single system that does not fit is an error.
pub fn compose_page<T: Scalar>(systems: &[Image<T>], cfg: &SynthConfig) -> Result<SynthPage<T>> {
    cfg.validate()?;
    if systems.is_empty() {
        return Err(Error::InvalidParameter("no systems to compose".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = rng.gen_range(cfg.min_systems..=cfg.max_systems);
    let picks: Vec<usize> = (0..n).map(|_| rng.gen_range(0..systems.len())).collect();
    let gaps: Vec<usize> = (0..n.saturating_sub(1))
        .map(|_| rng.gen_range(cfg.min_gap..=cfg.max_gap))
        .collect();

    let width = cfg.content_width();
    let mut n = n;
    let available = cfg.page_height - 2 * cfg.margin;
    while n > 0 {
        let used: usize = picks[..n]
            .iter()
            .map(|&i| systems[i].height())
            .sum::<usize>()
            + gaps[..n - 1].iter().sum::<usize>();
        if used <= available {
            break;
        }
        n -= 1;
    }
    if n == 0 {
        return Err(Error::DoesNotFit(format!(
            "system of height {} exceeds the {} rows inside the margins",
            systems[picks[0]].height(),
            available
        )));
    }

    let mut data = vec![T::one(); cfg.page_height * cfg.page_width];
    let mut mask = BinaryImage::zeros(cfg.page_height, cfg.page_width)?;
    let mut placements = Vec::with_capacity(n);
    let mut row = cfg.margin;
    for (k, &idx) in picks[..n].iter().enumerate() {
        let sys = imaging::resize_bilinear(&systems[idx], systems[idx].height(), width)?;
        for r in 0..sys.height() {
            let dst = (row + r) * cfg.page_width + cfg.margin;
            data[dst..dst + width].copy_from_slice(sys.row(r));
        }
        let placement = Placement {
            system_id: format!("system-{idx}"),
            row_start: row,
            row_end: row + sys.height(),
            col_start: cfg.margin,
            col_end: cfg.margin + width,
        };
        mask.fill_box(
            placement.row_start,
            placement.row_end,
            placement.col_start,
            placement.col_end,
        );
        row = placement.row_end + gaps.get(k).copied().unwrap_or(0);
        placements.push(placement);
    }

    Ok(SynthPage {
        page_id: format!("synth-{:016x}", cfg.seed),
        seed: cfg.seed,
        image: Image::from_raw(cfg.page_height, cfg.page_width, data),
        mask,
        placements,
    })
}

/// Step profile of a mask: `1` on rows with any foreground pixel, else `0`.
pub fn target_profile<T: Scalar>(mask: &BinaryImage) -> RowProfile<T> {
    let w = mask.width();
    let values = mask
        .data()
        .chunks(w)
        .map(|row| {
            if row.iter().any(|&v| v != 0) {
                T::one()
            } else {
                T::zero()
            }
        })
        .collect();
    RowProfile::new(values).expect("step values are valid")
}

/// Maximal runs `[start, end)` of nonzero profile values.
pub fn step_runs<T: Scalar>(profile: &RowProfile<T>) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (r, &v) in profile.values().iter().enumerate() {
        match (v > T::zero(), start) {
            (true, None) => start = Some(r),
            (false, Some(s)) => {
                runs.push((s, r));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, profile.len()));
    }
    runs
}

/// Seed of page `index` in a corpus seeded with `corpus_seed`.
pub fn page_seed(corpus_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(corpus_seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// Systems rendered for one page; the page draws from this pool.
pub const POOL_SIZE: usize = 6;

/// Page `index` of the corpus described by `cfg`, generated in memory.
pub fn synth_page<T: Scalar>(cfg: &SynthConfig, index: u64) -> Result<SynthPage<T>> {
    let seed = page_seed(cfg.seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = (0..POOL_SIZE)
        .map(|_| render_fake_system(cfg.content_width(), rng.next_u64()))
        .collect::<Result<Vec<Image<T>>>>()?;
    let page_cfg = SynthConfig {
        seed: rng.next_u64(),
        ..cfg.clone()
    };
    let mut page = compose_page(&pool, &page_cfg)?;
    page.page_id = format!("page-{index:05}");
    page.seed = seed;
    Ok(page)
}

/// Layout of a corpus directory.
#[derive(Clone, Debug)]
pub struct CorpusLayout {
    pub root: PathBuf,
}

impl CorpusLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn page(&self, id: &str) -> PathBuf {
        self.root.join("pages").join(format!("{id}.png"))
    }

    pub fn mask(&self, id: &str) -> PathBuf {
        self.root.join("masks").join(format!("{id}.png"))
    }

    pub fn meta(&self, id: &str) -> PathBuf {
        self.root.join("meta").join(format!("{id}.json"))
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn read_manifest(&self) -> Result<CorpusManifest> {
        read_json(&self.manifest())
    }

    pub fn read_meta(&self, id: &str) -> Result<PageMeta> {
        read_json(&self.meta(id))
    }
}

pub(crate) fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub(crate) fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(io_err(path))
}

/// Writes `count` pages with masks and placement records under `out`.
/// Nothing is written when `count` is zero.
pub fn generate_corpus(
    cfg: &SynthConfig,
    count: usize,
    out: impl AsRef<Path>,
) -> Result<CorpusManifest> {
    cfg.validate()?;
    let mut manifest = CorpusManifest {
        config: cfg.clone(),
        pages: Vec::with_capacity(count),
    };
    if count == 0 {
        return Ok(manifest);
    }
    let layout = CorpusLayout::new(out.as_ref());
    for dir in ["pages", "masks", "meta"] {
        let d = layout.root.join(dir);
        std::fs::create_dir_all(&d).map_err(io_err(&d))?;
    }
    for index in 0..count as u64 {
        let page: SynthPage<f64> = synth_page(cfg, index)?;
        imaging::save_gray_png(&page.image, layout.page(&page.page_id))?;
        imaging::save_mask_png(&page.mask, layout.mask(&page.page_id))?;
        write_json(&layout.meta(&page.page_id), &page.meta())?;
        manifest.pages.push(CorpusEntry {
            page_id: page.page_id,
            seed: page.seed,
        });
    }
    write_json(&layout.manifest(), &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn renderer_draws_ten_stave_lines() {
        let sys = render_fake_system_layout::<f64>(512, 1).unwrap();
        let img = &sys.image;
        assert!(
            (90..=140).contains(&img.height()),
            "height {}",
            img.height()
        );
        let dark: Vec<usize> = (0..img.height())
            .filter(|&r| img.row(r).iter().sum::<f64>() / (img.width() as f64) < 0.5)
            .collect();
        assert_eq!(dark.len(), 10);
        assert_eq!(dark, sys.staff_lines);
    }

    #[test]
    fn renderer_is_seeded() {
        let a = render_fake_system::<f64>(300, 5).unwrap();
        let b = render_fake_system::<f64>(300, 5).unwrap();
        let c = render_fake_system::<f64>(300, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(render_fake_system::<f64>(63, 1).is_err());
    }

    #[test]
    fn renderer_heights_stay_in_range() {
        for seed in 0..200 {
            let h = render_fake_system::<f32>(128, seed).unwrap().height();
            assert!((90..=140).contains(&h), "seed {seed}: {h}");
        }
    }

    fn pool(n: usize, width: usize) -> Vec<Image<f64>> {
        (0..n as u64)
            .map(|s| render_fake_system(width, s).unwrap())
            .collect()
    }

    #[test]
    fn single_system_gives_one_pulse() {
        let cfg = SynthConfig {
            min_systems: 1,
            max_systems: 1,
            seed: 9,
            ..Default::default()
        };
        let page = compose_page(&pool(3, 500), &cfg).unwrap();
        assert_eq!(page.placements.len(), 1);
        let t: RowProfile<f64> = target_profile(&page.mask);
        let p = &page.placements[0];
        assert_eq!(step_runs(&t), vec![(p.row_start, p.row_end)]);
    }

    #[test]
    fn overflowing_pages_drop_systems() {
        let cfg = SynthConfig {
            page_height: 400,
            min_systems: 5,
            max_systems: 5,
            ..Default::default()
        };
        let page = compose_page(&pool(4, 200), &cfg).unwrap();
        assert!(page.placements.len() < 5);
        assert!(page.placements.last().unwrap().row_end <= 400 - cfg.margin);

        let tiny = SynthConfig {
            page_height: 120,
            margin: 20,
            ..Default::default()
        };
        assert!(matches!(
            compose_page(&pool(2, 200), &tiny),
            Err(Error::DoesNotFit(_))
        ));
    }

    #[test]
    fn target_profile_of_one_box() {
        let mut mask = BinaryImage::zeros(512, 64).unwrap();
        mask.fill_box(100, 200, 10, 50);
        let t: RowProfile<f64> = target_profile(&mask);
        let expected: Vec<f64> = (0..512)
            .map(|r| if (100..200).contains(&r) { 1.0 } else { 0.0 })
            .collect();
        assert_eq!(t.values(), &expected[..]);
        let empty: RowProfile<f64> = target_profile(&BinaryImage::zeros(8, 8).unwrap());
        assert!(empty.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = SynthConfig::default();
        for cfg in [
            SynthConfig {
                min_systems: 0,
                ..base.clone()
            },
            SynthConfig {
                min_systems: 4,
                max_systems: 3,
                ..base.clone()
            },
            SynthConfig {
                min_gap: 0,
                ..base.clone()
            },
            SynthConfig {
                min_gap: 9,
                max_gap: 8,
                ..base.clone()
            },
            SynthConfig {
                margin: 400,
                ..base.clone()
            },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn pages_match_their_placements(seed in any::<u64>(), min in 1usize..4, extra in 0usize..3) {
            let cfg = SynthConfig {
                page_height: 700,
                page_width: 300,
                min_systems: min,
                max_systems: min + extra,
                seed,
                ..Default::default()
            };
            let page = compose_page(&pool(3, 220), &cfg).unwrap();
            let area: usize = page.placements.iter().map(Placement::area).sum();
            prop_assert_eq!(page.mask.count_ones(), area);
            for w in page.placements.windows(2) {
                prop_assert!(w[1].row_start > w[0].row_end);
            }
            for p in &page.placements {
                prop_assert!(p.row_end <= cfg.page_height && p.col_end <= cfg.page_width);
            }
            let t: RowProfile<f64> = target_profile(&page.mask);
            let runs: Vec<(usize, usize)> =
                page.placements.iter().map(|p| (p.row_start, p.row_end)).collect();
            prop_assert_eq!(step_runs(&t), runs);
            prop_assert_eq!(compose_page(&pool(3, 220), &cfg).unwrap(), page);
        }
    }
}
