//! Binned count data, gaps, and the geometric constants the regression consumes.
//!
//! A dataset is an ordered list of non-overlapping bins inside a range
//! `[x_a, x_b]`. Any part of the range not covered by a bin is a gap; gaps are
//! always inferred from the bin edges, never declared, so bins and gaps tile
//! the range exactly.

use std::io::Read;
use std::ops::RangeInclusive;

use crate::error::{Error, Result};

/// One measurement: the number of events recorded in `[x_lo, x_hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub x_lo: f64,
    pub x_hi: f64,
    pub count: u64,
}

impl Bin {
    pub fn new(x_lo: f64, x_hi: f64, count: u64) -> Result<Self> {
        if !(x_lo.is_finite() && x_hi.is_finite() && x_hi > x_lo) {
            return Err(Error::InvalidWidth { x_lo, x_hi });
        }
        Ok(Self { x_lo, x_hi, count })
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    /// The regressor value attached to the bin.
    #[inline]
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.x_lo + self.x_hi)
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.count as f64
    }
}

/// An interval of the range with no measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub x_lo: f64,
    pub x_hi: f64,
}

impl Gap {
    #[inline]
    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    #[inline]
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.x_lo + self.x_hi)
    }
}

/// Input schema of a CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    /// Header `x_lo,x_hi,count`.
    Edges,
    /// Header `index,cumulative`; unit bins `[i, i+1)`.
    Cumulative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedDataset {
    bins: Vec<Bin>,
    x_a: f64,
    x_b: f64,
    gaps: Vec<Gap>,
}

/// Constants derived from a dataset's layout and counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    /// Total counts `M`.
    pub total_counts: u64,
    /// Range `R = x_b - x_a`.
    pub range: f64,
    /// Summed gap width `R_G`.
    pub gap_range: f64,
    /// `S_G = sum_j R_{G,j} (x_{G,j} - x_a)`.
    pub gap_moment: f64,
    /// `S_1 = sum_i (x_i - x_a) dx_i`.
    pub s1: f64,
    /// Modified range `R_m = (R^2 - 2 S_G) / (R - R_G)`.
    pub modified_range: f64,
    pub n_bins: usize,
    /// Number of distinct bin midpoints carrying non-zero counts.
    pub n_nonzero: usize,
}

impl Geometry {
    /// Total covered length `R - R_G`.
    #[inline]
    pub fn covered(&self) -> f64 {
        self.range - self.gap_range
    }

    /// `S_1` from the range and gap constants alone, `(R^2 - 2 S_G) / 2`.
    #[inline]
    pub fn s1_from_range(&self) -> f64 {
        0.5 * (self.range * self.range - 2.0 * self.gap_moment)
    }

    #[inline]
    pub fn m(&self) -> f64 {
        self.total_counts as f64
    }
}

fn count_from_real(value: f64) -> Result<u64> {
    if !value.is_finite() || value < 0.0 || value.fract() != 0.0 || value > u64::MAX as f64 {
        return Err(Error::InvalidCount { value });
    }
    Ok(value as u64)
}

impl BinnedDataset {
    /// Builds a dataset from `(x_lo, x_hi, count)` rows in any order.
    ///
    /// The range defaults to `[min x_lo, max x_hi]`; uncovered sub-intervals
    /// become gaps.
    pub fn from_edges<I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64, f64)>,
    {
        let bins = rows
            .into_iter()
            .map(|(lo, hi, c)| Bin::new(lo, hi, count_from_real(c)?))
            .collect::<Result<Vec<_>>>()?;
        Self::from_bins(bins)
    }

    /// Builds unit bins `[i, i+1)` from `(index, cumulative)` rows.
    ///
    /// The first row's cumulative value is taken as its own count.
    pub fn from_cumulative<I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut bins = Vec::new();
        let mut prev: Option<(f64, f64)> = None;
        for (index, cumulative) in rows {
            let total = count_from_real(cumulative)?;
            let count = match prev {
                None => total,
                Some((pi, pc)) => {
                    if index - pi != 1.0 {
                        return Err(Error::NonUnitIndexStep {
                            previous: pi,
                            current: index,
                        });
                    }
                    if cumulative < pc {
                        return Err(Error::DecreasingCumulative {
                            index,
                            previous: pc,
                            current: cumulative,
                        });
                    }
                    total - pc as u64
                }
            };
            bins.push(Bin::new(index, index + 1.0, count)?);
            prev = Some((index, cumulative));
        }
        Self::from_bins(bins)
    }

    pub fn from_bins(mut bins: Vec<Bin>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::EmptyInput);
        }
        bins.sort_by(|a, b| a.x_lo.total_cmp(&b.x_lo));
        for w in bins.windows(2) {
            if w[1].x_lo < w[0].x_hi {
                return Err(Error::Overlap {
                    a_lo: w[0].x_lo,
                    a_hi: w[0].x_hi,
                    b_lo: w[1].x_lo,
                    b_hi: w[1].x_hi,
                });
            }
        }
        let x_a = bins[0].x_lo;
        let x_b = bins
            .iter()
            .map(|b| b.x_hi)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self::assemble(bins, x_a, x_b))
    }

    fn assemble(bins: Vec<Bin>, x_a: f64, x_b: f64) -> Self {
        let mut gaps = Vec::new();
        let mut cursor = x_a;
        for b in &bins {
            if b.x_lo > cursor {
                gaps.push(Gap {
                    x_lo: cursor,
                    x_hi: b.x_lo,
                });
            }
            cursor = b.x_hi;
        }
        if x_b > cursor {
            gaps.push(Gap {
                x_lo: cursor,
                x_hi: x_b,
            });
        }
        Self {
            bins,
            x_a,
            x_b,
            gaps,
        }
    }

    /// Moves the range start to `x_a`, which must not exceed the first bin edge.
    pub fn with_x_a(&self, x_a: f64) -> Result<Self> {
        if !x_a.is_finite() {
            return Err(Error::InvalidRange {
                value: x_a,
                reason: "not finite",
            });
        }
        if x_a > self.bins[0].x_lo {
            return Err(Error::InvalidRange {
                value: x_a,
                reason: "x_a lies after the first bin edge",
            });
        }
        Ok(Self::assemble(self.bins.clone(), x_a, self.x_b))
    }

    /// Moves the range end to `x_b`, which must not precede the last bin edge.
    pub fn with_x_b(&self, x_b: f64) -> Result<Self> {
        let last = self.bins.last().map(|b| b.x_hi).unwrap_or(self.x_b);
        if !x_b.is_finite() || x_b < last {
            return Err(Error::InvalidRange {
                value: x_b,
                reason: "x_b lies before the last bin edge",
            });
        }
        Ok(Self::assemble(self.bins.clone(), self.x_a, x_b))
    }

    /// Merges each group of bin indices into a single bin.
    ///
    /// Bins not named by any group are dropped and their intervals become
    /// gaps; the range is recomputed from the retained bins.
    pub fn rebin(&self, groups: &[RangeInclusive<usize>]) -> Result<Self> {
        self.rebin_with_dropped(groups).map(|(ds, _)| ds)
    }

    /// Like [`rebin`](Self::rebin), also returning the bins that were dropped.
    pub fn rebin_with_dropped(&self, groups: &[RangeInclusive<usize>]) -> Result<(Self, Vec<Bin>)> {
        let n = self.bins.len();
        let mut used = vec![false; n];
        let mut merged = Vec::with_capacity(groups.len());
        for g in groups {
            let (start, end) = (*g.start(), *g.end());
            if start > end {
                return Err(Error::InvalidGroup {
                    start,
                    end,
                    reason: "empty range",
                });
            }
            if end >= n {
                return Err(Error::InvalidGroup {
                    start,
                    end,
                    reason: "index out of bounds",
                });
            }
            for i in start..end {
                if self.bins[i + 1].x_lo != self.bins[i].x_hi {
                    return Err(Error::NonContiguousGroup {
                        start,
                        end,
                        gap_after: i,
                    });
                }
            }
            for flag in &mut used[start..=end] {
                if *flag {
                    return Err(Error::InvalidGroup {
                        start,
                        end,
                        reason: "overlaps another group",
                    });
                }
                *flag = true;
            }
            let count = self.bins[start..=end].iter().map(|b| b.count).sum();
            merged.push(Bin {
                x_lo: self.bins[start].x_lo,
                x_hi: self.bins[end].x_hi,
                count,
            });
        }
        let dropped = self
            .bins
            .iter()
            .zip(&used)
            .filter(|(_, &u)| !u)
            .map(|(b, _)| *b)
            .collect();
        Ok((Self::from_bins(merged)?, dropped))
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn gaps(&self) -> &[Gap] {
        &self.gaps
    }

    pub fn x_a(&self) -> f64 {
        self.x_a
    }

    pub fn x_b(&self) -> f64 {
        self.x_b
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn total_counts(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Offsets `x_i - x_a` of the bin midpoints.
    pub fn offsets(&self) -> impl Iterator<Item = f64> + '_ {
        self.bins.iter().map(move |b| b.midpoint() - self.x_a)
    }

    /// True when every bin has the same width.
    pub fn is_uniform(&self) -> bool {
        let w0 = self.bins[0].width();
        self.bins
            .iter()
            .all(|b| (b.width() - w0).abs() <= 1e-12 * w0.abs())
    }

    pub fn geometry(&self) -> Geometry {
        let range = self.x_b - self.x_a;
        let gap_range: f64 = self.gaps.iter().map(Gap::width).sum();
        let gap_moment: f64 = self
            .gaps
            .iter()
            .map(|g| g.width() * (g.midpoint() - self.x_a))
            .sum();
        let s1: f64 = self
            .bins
            .iter()
            .map(|b| (b.midpoint() - self.x_a) * b.width())
            .sum();
        let modified_range = (range * range - 2.0 * gap_moment) / (range - gap_range);

        let mut nonzero: Vec<f64> = self
            .bins
            .iter()
            .filter(|b| b.count > 0)
            .map(Bin::midpoint)
            .collect();
        nonzero.sort_by(f64::total_cmp);
        nonzero.dedup();

        Geometry {
            total_counts: self.total_counts(),
            range,
            gap_range,
            gap_moment,
            s1,
            modified_range,
            n_bins: self.bins.len(),
            n_nonzero: nonzero.len(),
        }
    }

    /// Reads a dataset from CSV text in the given schema.
    ///
    /// Lines starting with `#` are skipped.
    pub fn read_csv<R: Read>(reader: R, schema: Schema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .has_headers(true)
            .from_reader(reader);
        let expected: &[&str] = match schema {
            Schema::Edges => &["x_lo", "x_hi", "count"],
            Schema::Cumulative => &["index", "cumulative"],
        };
        let header = rdr.headers()?.clone();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(Error::EmptyInput);
        }
        if header.iter().ne(expected.iter().copied()) {
            return Err(Error::Header {
                found: header.iter().collect::<Vec<_>>().join(","),
                expected: expected.join(","),
            });
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let values = record
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::Parse {
                        line,
                        field: f.to_string(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(values);
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        match schema {
            Schema::Edges => Self::from_edges(rows.iter().map(|r| (r[0], r[1], r[2]))),
            Schema::Cumulative => Self::from_cumulative(rows.iter().map(|r| (r[0], r[1]))),
        }
    }
}
