//! Concordant/discordant pair counts and the directed Somers' D impact score.

use std::ops::{Add, AddAssign};

use crate::error::{Error, Result};
use crate::numcore::Matrix;
use crate::relranker::ScoreRecord;

/// Classification of all `m(m-1)/2` unordered index pairs of two variables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct PairCounts {
    pub concordant: u64,
    pub discordant: u64,
    /// Tied on the first variable only.
    pub ties_first: u64,
    /// Tied on the second variable only.
    pub ties_second: u64,
    pub ties_both: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.concordant + self.discordant + self.ties_first + self.ties_second + self.ties_both
    }
}

impl Add for PairCounts {
    type Output = PairCounts;

    fn add(self, o: PairCounts) -> PairCounts {
        PairCounts {
            concordant: self.concordant + o.concordant,
            discordant: self.discordant + o.discordant,
            ties_first: self.ties_first + o.ties_first,
            ties_second: self.ties_second + o.ties_second,
            ties_both: self.ties_both + o.ties_both,
        }
    }
}

impl AddAssign for PairCounts {
    fn add_assign(&mut self, o: PairCounts) {
        *self = *self + o;
    }
}

/// Which variable plays the independent role.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// First variable (`i`) independent: `S_ij`.
    Forward,
    /// Second variable (`j`) independent: `S_ji`.
    Reverse,
}

/// Which tie class enters the denominator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SomersConvention {
    /// Ties on the independent variable only.
    #[default]
    Independent,
    /// Ties on the dependent variable only (the textbook statistic).
    Classical,
}

impl std::str::FromStr for SomersConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(SomersConvention::Independent),
            "classical" => Ok(SomersConvention::Classical),
            other => Err(Error::Config(format!(
                "somers_convention must be independent or classical, got {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for SomersConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SomersConvention::Independent => "independent",
            SomersConvention::Classical => "classical",
        })
    }
}

/// Directed scores for one attribute pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelationEstimate {
    pub s_ij: f64,
    pub s_ji: f64,
    pub support: usize,
}

/// Above this many contingency cells the pairwise loop is used instead of a table.
const MAX_TABLE_CELLS: usize = 1 << 22;

fn dense_ranks<T: Ord>(values: &[T]) -> (Vec<usize>, usize) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].cmp(&values[b]));
    let mut ranks = vec![0; values.len()];
    let mut level = 0;
    for (k, &idx) in order.iter().enumerate() {
        if k > 0 && values[order[k - 1]] != values[idx] {
            level += 1;
        }
        ranks[idx] = level;
    }
    let levels = if values.is_empty() { 0 } else { level + 1 };
    (ranks, levels)
}

/// Counts pair classes through a contingency table with 2-D suffix sums, in
/// `O(m log m + k l)` for `k` and `l` distinct levels.
pub fn count_pairs<T: Ord>(x: &[T], y: &[T]) -> Result<PairCounts> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!(
            "count_pairs needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (rx, k) = dense_ranks(x);
    let (ry, l) = dense_ranks(y);
    if k.saturating_mul(l) > MAX_TABLE_CELLS {
        return Ok(count_pairs_pairwise(&rx, &ry));
    }

    let mut table = vec![0u64; k * l];
    for (&a, &b) in rx.iter().zip(&ry) {
        table[a * l + b] += 1;
    }
    // upper[a][b] = number of records with x-level > a and y-level > b.
    // lower[a][b] = number of records with x-level > a and y-level < b.
    let mut col_above = vec![0u64; l];
    let mut counts = PairCounts::default();
    for a in (0..k).rev() {
        let row = &table[a * l..(a + 1) * l];
        // Suffix sums of col_above give "x above a, y above b"; prefix sums give "y below b".
        let mut suffix = vec![0u64; l + 1];
        for b in (0..l).rev() {
            suffix[b] = suffix[b + 1] + col_above[b];
        }
        let mut prefix = 0u64;
        let mut row_total = 0u64;
        let mut row_sq = 0u64;
        for b in 0..l {
            let t = row[b];
            counts.concordant += t * suffix[b + 1];
            counts.discordant += t * prefix;
            prefix += col_above[b];
            row_total += t;
            row_sq += t * t;
            counts.ties_both += t * t.saturating_sub(1) / 2;
        }
        counts.ties_first += (row_total * row_total - row_sq) / 2;
        for b in 0..l {
            col_above[b] += row[b];
        }
    }
    let col_totals = col_above;
    let mut col_pairs = 0u64;
    for &c in &col_totals[..l] {
        col_pairs += c * c.saturating_sub(1) / 2;
    }
    // Pairs tied on y = ties_second + ties_both.
    counts.ties_second = col_pairs - counts.ties_both;
    Ok(counts)
}

fn count_pairs_pairwise(x: &[usize], y: &[usize]) -> PairCounts {
    let mut c = PairCounts::default();
    for a in 0..x.len() {
        for b in a + 1..x.len() {
            match (x[a].cmp(&x[b]), y[a].cmp(&y[b])) {
                (std::cmp::Ordering::Equal, std::cmp::Ordering::Equal) => c.ties_both += 1,
                (std::cmp::Ordering::Equal, _) => c.ties_first += 1,
                (_, std::cmp::Ordering::Equal) => c.ties_second += 1,
                (dx, dy) if dx == dy => c.concordant += 1,
                _ => c.discordant += 1,
            }
        }
    }
    c
}

/// `(N_c - N_d) / (N_c + N_d + T)`; an empty denominator yields 0.
pub fn somers_d(counts: &PairCounts, direction: Direction, convention: SomersConvention) -> f64 {
    let ties = match (direction, convention) {
        (Direction::Forward, SomersConvention::Independent) | (Direction::Reverse, SomersConvention::Classical) => {
            counts.ties_first
        }
        (Direction::Reverse, SomersConvention::Independent) | (Direction::Forward, SomersConvention::Classical) => {
            counts.ties_second
        }
    };
    let denom = counts.concordant + counts.discordant + ties;
    if denom == 0 {
        return 0.0;
    }
    (counts.concordant as f64 - counts.discordant as f64) / denom as f64
}

pub fn relation_estimate<T: Ord>(x: &[T], y: &[T], convention: SomersConvention) -> Result<RelationEstimate> {
    let counts = count_pairs(x, y)?;
    Ok(RelationEstimate {
        s_ij: somers_d(&counts, Direction::Forward, convention),
        s_ji: somers_d(&counts, Direction::Reverse, convention),
        support: x.len(),
    })
}

fn columns(records: &[ScoreRecord]) -> Result<Vec<Vec<u8>>> {
    let n = records.first().map_or(0, |r| r.scores.len());
    if records.iter().any(|r| r.scores.len() != n) {
        return Err(Error::Contract("score records disagree on attribute count".into()));
    }
    Ok((0..n)
        .map(|k| records.iter().map(|r| r.scores[k]).collect())
        .collect())
}

/// Signed `n x n` matrix with row = independent attribute `i`, column = dependent `j`.
pub fn relation_matrix(records: &[ScoreRecord], convention: SomersConvention) -> Result<Matrix> {
    if records.len() < 2 {
        return Err(Error::Contract(format!(
            "relation_matrix needs at least 2 records, got {}",
            records.len()
        )));
    }
    let cols = columns(records)?;
    let n = cols.len();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let est = relation_estimate(&cols[i], &cols[j], convention)?;
            out.set(i, j, est.s_ij);
            out.set(j, i, est.s_ji);
        }
    }
    Ok(out)
}

/// Pair counts accumulated batch by batch for every attribute pair.
#[derive(Clone, Debug)]
pub struct RelationTally {
    n: usize,
    counts: Vec<PairCounts>,
    records: usize,
}

impl RelationTally {
    pub fn new(n: usize) -> Self {
        RelationTally {
            n,
            counts: vec![PairCounts::default(); n * n],
            records: 0,
        }
    }

    /// Adds the within-batch pairs of `batch`.
    pub fn add_batch(&mut self, batch: &[&ScoreRecord]) -> Result<()> {
        if batch.iter().any(|r| r.scores.len() != self.n) {
            return Err(Error::Contract("score record width does not match tally".into()));
        }
        let cols: Vec<Vec<u8>> = (0..self.n)
            .map(|k| batch.iter().map(|r| r.scores[k]).collect())
            .collect();
        for i in 0..self.n {
            for j in i + 1..self.n {
                self.counts[i * self.n + j] += count_pairs(&cols[i], &cols[j])?;
            }
        }
        self.records += batch.len();
        Ok(())
    }

    pub fn records(&self) -> usize {
        self.records
    }

    pub fn matrix(&self, convention: SomersConvention) -> Matrix {
        let mut out = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in i + 1..self.n {
                let c = &self.counts[i * self.n + j];
                out.set(i, j, somers_d(c, Direction::Forward, convention));
                out.set(j, i, somers_d(c, Direction::Reverse, convention));
            }
        }
        out
    }
}
