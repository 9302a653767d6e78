//! Threshold segmentation of a page into systems from its row-sum profile.
//!
//! The inverted page is smoothed so that stave-dense bands become profile
//! maxima and blank inter-system space becomes deep minima. Minima lower than
//! `a_min` times the mean minimum are cut candidates; maxima higher than
//! `a_max` times the mean maximum bound the grouping intervals, and each
//! interval keeps only its lowest candidate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{self, Image};
use crate::scalar::Scalar;

/// Row sums of an image, one value per row.
#[derive(Clone, Debug, PartialEq)]
pub struct RowProfile<T> {
    values: Vec<T>,
}

impl<T: Scalar> RowProfile<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(v) = values
            .iter()
            .find(|v| !(**v >= T::zero()) || !v.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "profile values must be finite and non-negative, got {v}"
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            values: self.values.iter().map(|&v| v * factor).collect(),
        }
    }
}

/// A local extremum of a profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremum<T> {
    pub row: usize,
    pub value: T,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CriticalPoints<T> {
    pub minima: Vec<Extremum<T>>,
    pub maxima: Vec<Extremum<T>>,
}

impl<T> CriticalPoints<T> {
    pub fn is_empty(&self) -> bool {
        self.minima.is_empty() && self.maxima.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdParams<T> {
    /// Multiplier on the mean minimum below which a minimum is a cut candidate.
    pub a_min: T,
    /// Multiplier on the mean maximum above which a maximum bounds a group.
    pub a_max: T,
    /// Smoothing scale in pixels; `None` uses `height / 150`.
    pub sigma: Option<T>,
    pub min_region_height: usize,
    /// Largest column sum a trimmed-away boundary column may have.
    pub trim_epsilon: T,
    /// Fixed binarization threshold; `None` selects one with Otsu's method.
    pub binarize_threshold: Option<T>,
}

impl<T: Scalar> Default for ThresholdParams<T> {
    fn default() -> Self {
        Self {
            a_min: T::of(0.8),
            a_max: T::of(0.83),
            sigma: None,
            min_region_height: 32,
            trim_epsilon: T::of(0.5),
            binarize_threshold: None,
        }
    }
}

impl<T: Scalar> ThresholdParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_min > T::zero()) || !(self.a_max > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "a_min and a_max must be positive (got {}, {})",
                self.a_min, self.a_max
            )));
        }
        if let Some(s) = self.sigma {
            if !(s > T::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "sigma must be positive, got {s}"
                )));
            }
        }
        if !(self.trim_epsilon >= T::zero()) {
            return Err(Error::InvalidParameter(
                "trim_epsilon must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One system on a page: rows `[row_start, row_end)`, columns `[col_start, col_end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemRegion {
    pub row_start: usize,
    pub row_end: usize,
    pub col_start: usize,
    pub col_end: usize,
    pub order_index: usize,
}

impl SystemRegion {
    pub fn height(&self) -> usize {
        self.row_end - self.row_start
    }

    pub fn width(&self) -> usize {
        self.col_end - self.col_start
    }

    pub fn area(&self) -> usize {
        self.height() * self.width()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSegmentation {
    pub source: String,
    pub cuts: Vec<usize>,
    pub regions: Vec<SystemRegion>,
}

/// Outcome of cut selection on one profile.
#[derive(Clone, Debug, PartialEq)]
pub struct CutSelection<T> {
    pub cuts: Vec<usize>,
    /// Rows of the maxima above `a_max * mu_max`, ascending.
    pub selected_maxima: Vec<usize>,
    pub mu_min: Option<T>,
    pub mu_max: Option<T>,
    /// Set when the profile had no extrema at all.
    pub degenerate: bool,
}

/// Exact per-row sums.
pub fn row_profile<T: Scalar>(img: &Image<T>) -> RowProfile<T> {
    RowProfile {
        values: (0..img.height())
            .map(|r| img.row(r).iter().copied().sum())
            .collect(),
    }
}

/// Per-column sums over rows `[row_start, row_end)`.
pub fn column_profile<T: Scalar>(img: &Image<T>, row_start: usize, row_end: usize) -> Vec<T> {
    let mut sums = vec![T::zero(); img.width()];
    for r in row_start..row_end {
        for (s, &v) in sums.iter_mut().zip(img.row(r)) {
            *s += v;
        }
    }
    sums
}

/// Finite-difference derivative: central in the interior, one-sided at the ends.
pub fn derivative<T: Scalar>(values: &[T]) -> Vec<T> {
    let n = values.len();
    let half = T::of(0.5);
    (0..n)
        .map(|r| match r {
            0 => values[1] - values[0],
            r if r == n - 1 => values[n - 1] - values[n - 2],
            r => (values[r + 1] - values[r - 1]) * half,
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Slope {
    Down,
    Flat,
    Up,
}

/// Local extrema located from sign changes of the derivative.
///
/// A change from falling to rising marks a minimum and the reverse a maximum.
/// When the derivative is exactly zero between the two slopes, the extremum is
/// placed at the middle row of that zero run; when the sign flips directly,
/// the lower (or higher) of the two straddling rows is taken. End rows are
/// never reported.
pub fn critical_points<T: Scalar>(profile: &RowProfile<T>) -> Result<CriticalPoints<T>> {
    let p = profile.values();
    let n = p.len();
    if n < 3 {
        return Err(Error::ProfileTooShort(n));
    }
    let d = derivative(p);
    let slope = |v: T| {
        if v > T::zero() {
            Slope::Up
        } else if v < T::zero() {
            Slope::Down
        } else {
            Slope::Flat
        }
    };

    // Runs of equal slope as (slope, first row, last row).
    let mut runs: Vec<(Slope, usize, usize)> = Vec::new();
    for (r, &v) in d.iter().enumerate() {
        let s = slope(v);
        match runs.last_mut() {
            Some(last) if last.0 == s => last.2 = r,
            _ => runs.push((s, r, r)),
        }
    }

    let mut out = CriticalPoints::default();
    let mut prev: Option<(Slope, usize)> = None;
    let mut flat: Option<(usize, usize)> = None;
    for &(s, start, end) in &runs {
        if s == Slope::Flat {
            flat = Some((start, end));
            continue;
        }
        if let Some((ps, prev_end)) = prev {
            if ps != s {
                let row = match flat {
                    Some((fs, fe)) => (fs + fe) / 2,
                    None => {
                        let (a, b) = (prev_end, start);
                        let pick_b = match s {
                            Slope::Up => p[b] < p[a],
                            _ => p[b] > p[a],
                        };
                        if pick_b {
                            b
                        } else {
                            a
                        }
                    }
                };
                if row > 0 && row < n - 1 {
                    let e = Extremum { row, value: p[row] };
                    if s == Slope::Up {
                        out.minima.push(e);
                    } else {
                        out.maxima.push(e);
                    }
                }
            }
        }
        prev = Some((s, end));
        flat = None;
    }
    Ok(out)
}

fn mean<T: Scalar>(points: &[Extremum<T>]) -> Option<T> {
    if points.is_empty() {
        None
    } else {
        Some(points.iter().map(|e| e.value).sum::<T>() / T::of_usize(points.len()))
    }
}

/// Minima with `value <= a_min * mu_min`, in row order.
pub fn cut_candidates<T: Scalar>(cp: &CriticalPoints<T>, a_min: T) -> Vec<Extremum<T>> {
    match mean(&cp.minima) {
        Some(mu) => {
            let limit = a_min * mu;
            cp.minima
                .iter()
                .copied()
                .filter(|e| e.value <= limit)
                .collect()
        }
        None => Vec::new(),
    }
}

/// Maxima with `value > a_max * mu_max`, in row order.
pub fn selected_maxima<T: Scalar>(cp: &CriticalPoints<T>, a_max: T) -> Vec<Extremum<T>> {
    match mean(&cp.maxima) {
        Some(mu) => {
            let limit = a_max * mu;
            cp.maxima
                .iter()
                .copied()
                .filter(|e| e.value > limit)
                .collect()
        }
        None => Vec::new(),
    }
}

/// Chooses cut rows: one lowest candidate per interval between consecutive
/// selected maxima, with the page edges closing the outermost intervals.
///
/// Ties between equal candidates go to the smaller row.
pub fn select_cuts<T: Scalar>(
    profile: &RowProfile<T>,
    cp: &CriticalPoints<T>,
    params: &ThresholdParams<T>,
) -> CutSelection<T> {
    debug_assert!(cp
        .minima
        .iter()
        .chain(&cp.maxima)
        .all(|e| e.row < profile.len()));
    let mu_min = mean(&cp.minima);
    let mu_max = mean(&cp.maxima);
    let candidates = cut_candidates(cp, params.a_min);
    let maxima: Vec<usize> = selected_maxima(cp, params.a_max)
        .iter()
        .map(|e| e.row)
        .collect();

    let mut cuts = Vec::new();
    let mut best: Option<Extremum<T>> = None;
    let mut group = 0usize;
    for cand in candidates {
        // Index of the grouping interval: number of selected maxima above the row.
        let g = maxima.partition_point(|&m| m < cand.row);
        if g != group {
            if let Some(b) = best.take() {
                cuts.push(b.row);
            }
            group = g;
        }
        match best {
            Some(b) if b.value <= cand.value => {}
            _ => best = Some(cand),
        }
    }
    if let Some(b) = best {
        cuts.push(b.row);
    }

    CutSelection {
        cuts,
        selected_maxima: maxima,
        mu_min,
        mu_max,
        degenerate: cp.is_empty(),
    }
}

/// Turns cut rows into ordered system regions.
///
/// Each span between consecutive cuts (or a page edge) becomes a region when it
/// contains one of `selected_maxima` and is at least `min_region_height` rows
/// tall. Columns are then trimmed while the boundary column sum over the
/// region stays within `trim_epsilon`.
pub fn extract_regions<T: Scalar>(
    img: &Image<T>,
    cuts: &[usize],
    selected_maxima: &[usize],
    params: &ThresholdParams<T>,
) -> Result<PageSegmentation> {
    let height = img.height();
    if cuts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "cuts must strictly increase: {cuts:?}"
        )));
    }
    if let Some(&c) = cuts.iter().find(|&&c| c == 0 || c >= height) {
        return Err(Error::InvalidParameter(format!(
            "cut row {c} outside (0, {height})"
        )));
    }

    let mut bounds = Vec::with_capacity(cuts.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(cuts);
    bounds.push(height);

    let mut regions = Vec::new();
    for w in bounds.windows(2) {
        let (row_start, row_end) = (w[0], w[1]);
        let has_peak = selected_maxima
            .iter()
            .any(|&m| m >= row_start && m < row_end);
        if !has_peak || row_end - row_start < params.min_region_height {
            continue;
        }
        let cols = column_profile(img, row_start, row_end);
        let (col_start, col_end) = trim_columns(&cols, params.trim_epsilon);
        regions.push(SystemRegion {
            row_start,
            row_end,
            col_start,
            col_end,
            order_index: regions.len(),
        });
    }
    Ok(PageSegmentation {
        source: String::new(),
        cuts: cuts.to_vec(),
        regions,
    })
}

/// Shrinks `[0, len)` past boundary columns whose sum is within `epsilon`.
/// A span with no column above `epsilon` is kept whole.
fn trim_columns<T: Scalar>(cols: &[T], epsilon: T) -> (usize, usize) {
    match cols.iter().position(|&v| v > epsilon) {
        Some(start) => {
            let end = cols.iter().rposition(|&v| v > epsilon).unwrap() + 1;
            (start, end)
        }
        None => (0, cols.len()),
    }
}

/// Intermediate results of the threshold method for one page.
#[derive(Clone, Debug)]
pub struct PageAnalysis<T> {
    /// Skeletonized ink as `0.0` / `1.0`.
    pub skeleton: Image<T>,
    /// Row profile of the smoothed skeleton.
    pub profile: RowProfile<T>,
    pub critical: CriticalPoints<T>,
    pub selection: CutSelection<T>,
    pub segmentation: PageSegmentation,
}

/// Runs the full threshold method and keeps every intermediate.
///
/// A page with a single intensity level has no Otsu split; it is binarized at
/// `0.5` instead, which makes a blank page produce no ink at all.
pub fn analyze_page<T: Scalar>(
    img: &Image<T>,
    params: &ThresholdParams<T>,
) -> Result<PageAnalysis<T>> {
    params.validate()?;
    let inverted = imaging::invert(img);
    let binary = match imaging::binarize(&inverted, params.binarize_threshold) {
        Err(Error::DegenerateHistogram) => imaging::binarize(&inverted, Some(T::of(0.5)))?,
        other => other?,
    };
    let skeleton = imaging::to_gray(&imaging::skeletonize(&binary));
    let sigma = params
        .sigma
        .unwrap_or_else(|| imaging::default_sigma(img.height()));
    let smoothed = imaging::gaussian_blur(&skeleton, sigma)?;
    let profile = row_profile(&smoothed);

    if profile.len() < 3 {
        let selection = CutSelection {
            cuts: Vec::new(),
            selected_maxima: Vec::new(),
            mu_min: None,
            mu_max: None,
            degenerate: true,
        };
        return Ok(PageAnalysis {
            skeleton,
            profile,
            critical: CriticalPoints::default(),
            selection,
            segmentation: PageSegmentation::default(),
        });
    }

    let critical = critical_points(&profile)?;
    let selection = select_cuts(&profile, &critical, params);
    let segmentation = extract_regions(
        &skeleton,
        &selection.cuts,
        &selection.selected_maxima,
        params,
    )?;
    Ok(PageAnalysis {
        skeleton,
        profile,
        critical,
        selection,
        segmentation,
    })
}

/// Threshold-method segmentation of a page loaded with dark ink on light paper.
pub fn segment_page<T: Scalar>(
    img: &Image<T>,
    params: &ThresholdParams<T>,
) -> Result<PageSegmentation> {
    Ok(analyze_page(img, params)?.segmentation)
}
