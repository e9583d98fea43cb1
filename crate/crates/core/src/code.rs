//! Parity-check matrices, the raptor-like rate-adaptive code family, syndromes
//! and alist I/O.
//!
//! A code of the family is fixed by the information length `k` and a rate index
//! `i`: it has `N = 5k + i` variables, `M = 4k + i` checks and rate
//! `R = k / (5k + i)`. The first `5k` variables and `4k` checks form a rate-1/5
//! mother code grown with progressive edge growth (PEG). Each of the `i`
//! extension stages then appends one degree-1 variable and one check joining it
//! to a few mother-code variables, so the matrix for a smaller `i` is always
//! the top-left corner of the matrix for a larger one.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, AlistError, Error, Result};

/// Sparse binary matrix stored both by rows and by columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n_vars: usize,
    row_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    col_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    // position in row storage of each column-storage entry
    col_edge: Vec<u32>,
}

impl ParityCheckMatrix {
    /// Builds a matrix from the variable lists of each check.
    ///
    /// Lists may come in any order; they are sorted. Out-of-range indices,
    /// duplicates and empty checks are rejected.
    pub fn from_rows(n_vars: usize, rows: &[Vec<usize>]) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut row_idx = Vec::new();
        row_ptr.push(0);
        for (j, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return invalid(format!("check {j} has no variables"));
            }
            let mut sorted = row.clone();
            sorted.sort_unstable();
            if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                return invalid(format!("check {j} lists variable {} twice", w[0]));
            }
            if let Some(&v) = sorted.last().filter(|&&v| v >= n_vars) {
                return invalid(format!("check {j} references variable {v} >= {n_vars}"));
            }
            row_idx.extend(sorted.iter().map(|&v| v as u32));
            row_ptr.push(row_idx.len());
        }
        if n_vars > u32::MAX as usize || rows.len() > u32::MAX as usize {
            return invalid("matrix too large for 32-bit indices");
        }
        Ok(Self::from_csr(n_vars, row_ptr, row_idx))
    }

    // Row lists must already be sorted, in range and duplicate free.
    fn from_csr(n_vars: usize, row_ptr: Vec<usize>, row_idx: Vec<u32>) -> Self {
        let n_checks = row_ptr.len() - 1;
        let mut col_ptr = vec![0usize; n_vars + 1];
        for &v in &row_idx {
            col_ptr[v as usize + 1] += 1;
        }
        for i in 0..n_vars {
            col_ptr[i + 1] += col_ptr[i];
        }
        let mut fill = col_ptr.clone();
        let mut col_idx = vec![0u32; row_idx.len()];
        let mut col_edge = vec![0u32; row_idx.len()];
        // scanning rows in order leaves every column list sorted
        for j in 0..n_checks {
            for e in row_ptr[j]..row_ptr[j + 1] {
                let v = row_idx[e] as usize;
                col_idx[fill[v]] = j as u32;
                col_edge[fill[v]] = e as u32;
                fill[v] += 1;
            }
        }
        Self {
            n_vars,
            row_ptr,
            row_idx,
            col_ptr,
            col_idx,
            col_edge,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_checks(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.row_idx.len()
    }

    /// Sorted variable indices of check `j`.
    pub fn row(&self, j: usize) -> &[u32] {
        &self.row_idx[self.row_ptr[j]..self.row_ptr[j + 1]]
    }

    /// Sorted check indices of variable `i`.
    pub fn col(&self, i: usize) -> &[u32] {
        &self.col_idx[self.col_ptr[i]..self.col_ptr[i + 1]]
    }

    /// Edge numbers (row-major) of the entries of row `j`.
    pub fn row_edges(&self, j: usize) -> std::ops::Range<usize> {
        self.row_ptr[j]..self.row_ptr[j + 1]
    }

    /// Row-major edge numbers of the entries of column `i`, in check order.
    pub fn col_edges(&self, i: usize) -> &[u32] {
        &self.col_edge[self.col_ptr[i]..self.col_ptr[i + 1]]
    }

    pub fn max_row_degree(&self) -> usize {
        (0..self.n_checks()).map(|j| self.row(j).len()).max().unwrap_or(0)
    }

    pub fn max_col_degree(&self) -> usize {
        (0..self.n_vars).map(|i| self.col(i).len()).max().unwrap_or(0)
    }

    /// Rows as plain index lists.
    pub fn rows(&self) -> Vec<Vec<usize>> {
        (0..self.n_checks())
            .map(|j| self.row(j).iter().map(|&v| v as usize).collect())
            .collect()
    }

    /// The matrix restricted to its first `n_checks` rows and `n_vars` columns.
    /// Fails if a kept row touches a dropped column.
    pub fn prefix(&self, n_checks: usize, n_vars: usize) -> Result<Self> {
        if n_checks > self.n_checks() || n_vars > self.n_vars {
            return invalid("prefix larger than matrix");
        }
        let end = self.row_ptr[n_checks];
        if self.row_idx[..end].iter().any(|&v| v as usize >= n_vars) {
            return invalid("kept rows reference dropped columns");
        }
        Ok(Self::from_csr(
            n_vars,
            self.row_ptr[..=n_checks].to_vec(),
            self.row_idx[..end].to_vec(),
        ))
    }
}

/// Rate-adaptation parameters of the raptor-like family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub k: usize,
    pub rate_index: usize,
}

impl CodeSpec {
    pub fn new(k: usize, rate_index: usize) -> Result<Self> {
        let spec = Self { k, rate_index };
        spec.validate()?;
        Ok(spec)
    }

    /// Picks `rate_index = round(k / rate) - 5k`.
    pub fn from_target_rate(k: usize, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return invalid(format!("rate must be positive, got {rate}"));
        }
        if rate > 0.2 + 1e-12 {
            return invalid(format!("rate {rate} exceeds the mother-code rate 0.2"));
        }
        let n = (k as f64 / rate).round() as i64;
        let i = n - 5 * k as i64;
        if i < 0 {
            return invalid(format!("rate {rate} exceeds the mother-code rate 0.2"));
        }
        Self::new(k, i as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return invalid("k must be positive");
        }
        if self.rate_index > 95 * self.k {
            return invalid(format!(
                "rate index {} exceeds 95k = {} (rate below 0.01)",
                self.rate_index,
                95 * self.k
            ));
        }
        Ok(())
    }

    /// Block length `5k + i`.
    pub fn n(&self) -> usize {
        5 * self.k + self.rate_index
    }

    /// Number of checks `4k + i`.
    pub fn m(&self) -> usize {
        4 * self.k + self.rate_index
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n() as f64
    }
}

/// Mother-code degree profile and extension degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeProfile {
    /// `(degree, fraction of mother-code variables)` pairs.
    pub var_degrees: Vec<(usize, f64)>,
    /// Mother-code variables joined by each extension check.
    pub ext_degree: usize,
    /// BFS depth limit for PEG (counted in check levels).
    pub peg_depth: usize,
    /// PEG stops expanding once this many checks are in the local tree.
    pub peg_reach: usize,
}

impl Default for CodeProfile {
    fn default() -> Self {
        Self {
            var_degrees: vec![(2, 0.3), (3, 0.5), (5, 0.2)],
            ext_degree: 2,
            peg_depth: 8,
            peg_reach: 2048,
        }
    }
}

impl CodeProfile {
    /// Degrees of `n` variables, ascending, matching the fractions as closely
    /// as rounding allows.
    fn degree_sequence(&self, n: usize) -> Result<Vec<usize>> {
        let total: f64 = self.var_degrees.iter().map(|(_, f)| f).sum();
        if self.var_degrees.is_empty() || (total - 1.0).abs() > 1e-9 {
            return invalid("degree fractions must sum to 1");
        }
        let mut profile = self.var_degrees.clone();
        profile.sort_by_key(|&(d, _)| d);
        let mut out = Vec::with_capacity(n);
        let mut acc = 0.0;
        for &(d, f) in &profile {
            if d == 0 {
                return invalid("variable degree must be positive");
            }
            acc += f;
            let upto = ((acc * n as f64).round() as usize).min(n);
            out.resize(upto.max(out.len()), d);
        }
        let last = profile.last().unwrap().0;
        out.resize(n, last);
        Ok(out)
    }
}

/// Builds the rate-adaptive code with the default profile.
pub fn build_rate_adaptive(spec: &CodeSpec, seed: u64) -> Result<ParityCheckMatrix> {
    build_rate_adaptive_with(spec, seed, &CodeProfile::default())
}

pub fn build_rate_adaptive_with(spec: &CodeSpec, seed: u64, profile: &CodeProfile) -> Result<ParityCheckMatrix> {
    spec.validate()?;
    let n0 = 5 * spec.k;
    let m0 = 4 * spec.k;
    if profile.ext_degree == 0 || profile.ext_degree > n0 {
        return invalid(format!("extension degree {} out of range", profile.ext_degree));
    }
    let degrees = profile.degree_sequence(n0)?;
    if degrees.iter().any(|&d| d > m0) {
        return invalid("variable degree exceeds the number of checks");
    }
    let mother = peg(&degrees, m0, profile.peg_depth.max(1), profile.peg_reach.max(1));

    let n = spec.n();
    let m = spec.m();
    let mut row_ptr = Vec::with_capacity(m + 1);
    let mut row_idx = Vec::with_capacity(
        mother.iter().map(Vec::len).sum::<usize>() + spec.rate_index * (profile.ext_degree + 1),
    );
    row_ptr.push(0);
    for mut row in mother {
        row.sort_unstable();
        row_idx.extend(row);
        row_ptr.push(row_idx.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(profile.ext_degree);
    for t in 0..spec.rate_index {
        picked.clear();
        picked.extend(sample(&mut rng, n0, profile.ext_degree).into_iter().map(|v| v as u32));
        picked.sort_unstable();
        row_idx.extend_from_slice(&picked);
        row_idx.push((n0 + t) as u32);
        row_ptr.push(row_idx.len());
    }
    Ok(ParityCheckMatrix::from_csr(n, row_ptr, row_idx))
}

/// Progressive edge growth over `m` checks for variables with the given
/// (ascending) degrees. Returns the variable list of every check.
fn peg(degrees: &[usize], m: usize, max_depth: usize, max_reach: usize) -> Vec<Vec<u32>> {
    let n = degrees.len();
    let mut var_adj: Vec<Vec<u32>> = degrees.iter().map(|&d| Vec::with_capacity(d)).collect();
    let mut chk_adj: Vec<Vec<u32>> = vec![Vec::new(); m];
    // checks bucketed by current degree, each bucket ordered by index
    let mut buckets: Vec<BTreeSet<u32>> = vec![(0..m as u32).collect()];

    let mut chk_mark = vec![0u32; m];
    let mut var_mark = vec![0u32; n];
    let mut stamp = 0u32;
    let mut frontier: Vec<u32> = Vec::new();
    let mut next: Vec<u32> = Vec::new();
    let mut level_checks: Vec<u32> = Vec::new();

    for v in 0..n {
        for edge in 0..degrees[v] {
            let chosen = if edge == 0 {
                lowest_degree(&buckets, |_| true)
            } else {
                stamp += 1;
                let mut reached = 0usize;
                frontier.clear();
                var_mark[v] = stamp;
                for &c in &var_adj[v] {
                    chk_mark[c as usize] = stamp;
                    reached += 1;
                    frontier.push(c);
                }
                let mut depth = 0;
                let mut candidates: Option<&[u32]> = None;
                while depth < max_depth && reached < max_reach {
                    next.clear();
                    for &c in &frontier {
                        for &u in &chk_adj[c as usize] {
                            if var_mark[u as usize] == stamp {
                                continue;
                            }
                            var_mark[u as usize] = stamp;
                            for &c2 in &var_adj[u as usize] {
                                if chk_mark[c2 as usize] != stamp {
                                    chk_mark[c2 as usize] = stamp;
                                    next.push(c2);
                                }
                            }
                        }
                    }
                    if next.is_empty() {
                        break;
                    }
                    reached += next.len();
                    if reached == m {
                        // every check is reachable: take the most distant ones
                        level_checks.clear();
                        level_checks.extend_from_slice(&next);
                        candidates = Some(&level_checks);
                        break;
                    }
                    std::mem::swap(&mut frontier, &mut next);
                    depth += 1;
                }
                match candidates {
                    Some(level) => level
                        .iter()
                        .copied()
                        .min_by_key(|&c| (chk_adj[c as usize].len(), c))
                        .unwrap(),
                    None => lowest_degree(&buckets, |c| chk_mark[c as usize] != stamp),
                }
            };
            let c = chosen as usize;
            let deg = chk_adj[c].len();
            buckets[deg].remove(&chosen);
            if buckets.len() <= deg + 1 {
                buckets.push(BTreeSet::new());
            }
            buckets[deg + 1].insert(chosen);
            chk_adj[c].push(v as u32);
            var_adj[v].push(chosen);
        }
    }
    chk_adj
}

fn lowest_degree(buckets: &[BTreeSet<u32>], allowed: impl Fn(u32) -> bool) -> u32 {
    buckets
        .iter()
        .find_map(|b| b.iter().copied().find(|&c| allowed(c)))
        .expect("a check outside the local tree always exists")
}

/// Binary syndrome `H x^T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Syndrome {
    pub bits: Vec<u8>,
}

impl Syndrome {
    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![0; len] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn xor(&self, other: &Self) -> Self {
        Self {
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a ^ b).collect(),
        }
    }
}

pub fn syndrome(h: &ParityCheckMatrix, bits: &[u8]) -> Result<Syndrome> {
    if bits.len() != h.n_vars() {
        return invalid(format!(
            "{} bits for a matrix with {} variables",
            bits.len(),
            h.n_vars()
        ));
    }
    Ok(Syndrome {
        bits: (0..h.n_checks())
            .map(|j| h.row(j).iter().fold(0u8, |acc, &v| acc ^ (bits[v as usize] & 1)))
            .collect(),
    })
}

/// Whether `bits` has syndrome `s`; stops at the first unsatisfied check.
pub fn satisfies(h: &ParityCheckMatrix, bits: &[u8], s: &Syndrome) -> bool {
    (0..h.n_checks()).all(|j| h.row(j).iter().fold(0u8, |acc, &v| acc ^ bits[v as usize]) == s.bits[j])
}

/// Writes the matrix in zero-padded alist format.
pub fn save_alist(h: &ParityCheckMatrix) -> String {
    let mut out = String::new();
    let (n, m) = (h.n_vars(), h.n_checks());
    let (max_col, max_row) = (h.max_col_degree(), h.max_row_degree());
    let _ = writeln!(out, "{n} {m}");
    let _ = writeln!(out, "{max_col} {max_row}");
    let join = |it: &mut dyn Iterator<Item = usize>| it.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let _ = writeln!(out, "{}", join(&mut (0..n).map(|i| h.col(i).len())));
    let _ = writeln!(out, "{}", join(&mut (0..m).map(|j| h.row(j).len())));
    for i in 0..n {
        let col = h.col(i);
        let padded = col.iter().map(|&c| c as usize + 1).chain(std::iter::repeat_n(0, max_col - col.len()));
        let _ = writeln!(out, "{}", join(&mut padded.into_iter()));
    }
    for j in 0..m {
        let row = h.row(j);
        let padded = row.iter().map(|&v| v as usize + 1).chain(std::iter::repeat_n(0, max_row - row.len()));
        let _ = writeln!(out, "{}", join(&mut padded.into_iter()));
    }
    out
}

struct AlistLines<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> AlistLines<'a> {
    fn err(line: usize, kind: AlistError) -> Error {
        Error::Alist { line, kind }
    }

    // Next non-blank line as integers, with its 1-based line number.
    fn next_ints(&mut self) -> Result<(usize, Vec<usize>)> {
        for (no, line) in self.lines.by_ref() {
            if line.trim().is_empty() {
                continue;
            }
            let ints = line
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| Self::err(no + 1, AlistError::NotInteger(t.to_string()))))
                .collect::<Result<Vec<_>>>()?;
            return Ok((no + 1, ints));
        }
        let last = self.lines.peek().map(|(n, _)| n + 1).unwrap_or(0);
        Err(Self::err(last, AlistError::Truncated))
    }

    fn exact(&mut self, expected: usize) -> Result<(usize, Vec<usize>)> {
        let (no, ints) = self.next_ints()?;
        if ints.len() != expected {
            return Err(Self::err(no, AlistError::Count { expected, found: ints.len() }));
        }
        Ok((no, ints))
    }

    // An adjacency line: `degree` 1-based indices, then optional zero padding.
    fn adjacency(&mut self, degree: usize, max_deg: usize, range: usize) -> Result<(usize, Vec<usize>)> {
        let (no, ints) = self.next_ints()?;
        if ints.len() < degree || ints.len() > max_deg.max(degree) {
            return Err(Self::err(no, AlistError::Count { expected: degree, found: ints.len() }));
        }
        let (entries, pad) = ints.split_at(degree);
        if pad.iter().any(|&p| p != 0) {
            return Err(Self::err(no, AlistError::Count { expected: degree, found: ints.len() }));
        }
        let mut seen = Vec::with_capacity(degree);
        for &e in entries {
            if e == 0 || e > range {
                return Err(Self::err(no, AlistError::OutOfRange { index: e, max: range }));
            }
            if seen.contains(&(e - 1)) {
                return Err(Self::err(no, AlistError::Duplicate(e)));
            }
            seen.push(e - 1);
        }
        Ok((no, seen))
    }
}

/// Parses an alist file. Both padded and unpadded adjacency lines are accepted;
/// the column and row lists must describe the same matrix.
pub fn load_alist(text: &str) -> Result<ParityCheckMatrix> {
    let mut lines = AlistLines {
        lines: text.lines().enumerate().peekable(),
    };
    let header = |no, msg: &str| AlistLines::err(no, AlistError::Header(msg.to_string()));
    let (no, dims) = lines.next_ints()?;
    let [n, m] = dims[..] else {
        return Err(header(no, "expected `N M`"));
    };
    if n == 0 || m == 0 {
        return Err(header(no, "empty matrix"));
    }
    let (no, maxes) = lines.next_ints()?;
    let [max_col, max_row] = maxes[..] else {
        return Err(header(no, "expected maximum column and row degrees"));
    };
    let (col_line, col_deg) = lines.exact(n)?;
    let (row_line, row_deg) = lines.exact(m)?;
    for (&d, line, max) in col_deg.iter().map(|d| (d, col_line, max_col)).chain(row_deg.iter().map(|d| (d, row_line, max_row))) {
        if d > max {
            return Err(AlistLines::err(line, AlistError::DegreeTooLarge { degree: d, max }));
        }
    }
    if col_deg.iter().sum::<usize>() != row_deg.iter().sum::<usize>() {
        return Err(AlistLines::err(
            row_line,
            AlistError::Inconsistent("column and row degrees have different totals".into()),
        ));
    }
    let mut cols = Vec::with_capacity(n);
    for &d in &col_deg {
        cols.push(lines.adjacency(d, max_col, m)?);
    }
    let mut rows = Vec::with_capacity(m);
    let mut row_lines = Vec::with_capacity(m);
    for &d in &row_deg {
        let (no, r) = lines.adjacency(d, max_row, n)?;
        if r.is_empty() {
            return Err(AlistLines::err(no, AlistError::Inconsistent("check with no variables".into())));
        }
        rows.push(r);
        row_lines.push(no);
    }
    for (i, (no, col)) in cols.iter().enumerate() {
        for &j in col {
            if !rows[j].contains(&i) {
                return Err(AlistLines::err(
                    *no,
                    AlistError::Inconsistent(format!("variable {} lists check {} but not vice versa", i + 1, j + 1)),
                ));
            }
        }
    }
    for (j, row) in rows.iter().enumerate() {
        for &i in row {
            if !cols[i].1.contains(&j) {
                return Err(AlistLines::err(
                    row_lines[j],
                    AlistError::Inconsistent(format!("check {} lists variable {} but not vice versa", j + 1, i + 1)),
                ));
            }
        }
    }
    ParityCheckMatrix::from_rows(n, &rows)
}
