//! Sparse SDPA (`.dat-s`) reader and writer.
//!
//! The file encodes
//!
//! > minimize `c^T x` subject to `sum_k x_k F_k - F_0 >= 0`
//!
//! which is exactly the shape of [`SdpProblem`]: matrix `0` is the
//! objective matrix `G` and matrices `1..=m` are the constraint matrices,
//! with the `c` line carrying the constraint values. Positive block sizes
//! are semidefinite blocks, negative sizes diagonal ones.
//!
//! The writer emits one semidefinite block and, when present, one diagonal
//! block, with entries in a fixed canonical order so equal problems produce
//! byte-identical files. The reader accepts any block structure: several
//! semidefinite blocks are packed along the diagonal of a single dense
//! block, which preserves both feasible sets because no data matrix couples
//! distinct blocks.

use super::sparse::{BlockMatrix, SparseSym};
use super::SdpProblem;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// Renders a problem in `.dat-s` form.
pub fn to_dat_s(problem: &SdpProblem) -> String {
    let m = problem.m();
    let s = problem.sdp_dim;
    let l = problem.lp_dim;
    let mut out = String::new();
    out.push_str("\"moment relaxation export\n");
    let _ = writeln!(out, "{m}");
    let mut blocks: Vec<i64> = Vec::new();
    if s > 0 {
        blocks.push(s as i64);
    }
    if l > 0 {
        blocks.push(-(l as i64));
    }
    if blocks.is_empty() {
        blocks.push(1);
    }
    let _ = writeln!(out, "{}", blocks.len());
    let sizes: Vec<String> = blocks.iter().map(|b| b.to_string()).collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let cs: Vec<String> = problem
        .constraints
        .iter()
        .map(|(_, c)| format_f64(*c))
        .collect();
    let _ = writeln!(out, "{}", cs.join(" "));
    let sdp_block = 1;
    let lp_block = if s > 0 { 2 } else { 1 };
    let emit = |k: usize, f: &BlockMatrix, out: &mut String| {
        for &(i, j, v) in f.sdp.upper() {
            let _ = writeln!(out, "{k} {sdp_block} {} {} {}", i + 1, j + 1, format_f64(v));
        }
        for &(t, v) in &f.lp {
            let _ = writeln!(out, "{k} {lp_block} {} {} {}", t + 1, t + 1, format_f64(v));
        }
    };
    emit(0, &problem.objective, &mut out);
    for (k, (f, _)) in problem.constraints.iter().enumerate() {
        emit(k + 1, f, &mut out);
    }
    out
}

pub fn write_dat_s(path: &Path, problem: &SdpProblem) -> Result<()> {
    std::fs::write(path, to_dat_s(problem))
        .map_err(|e| Error::Solver(format!("cannot write {}: {e}", path.display())))
}

pub fn read_dat_s(path: &Path) -> Result<SdpProblem> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    from_dat_s(&text)
}

/// Shortest decimal that parses back to the same bits.
fn format_f64(v: f64) -> String {
    format!("{v}")
}

/// Where a 1-based (block, index) pair lands in the two-block layout.
struct BlockLayout {
    /// Per input block: dense offset for semidefinite blocks (usize::MAX
    /// for diagonal ones), diagonal offset otherwise.
    dense_offset: Vec<usize>,
    diag_offset: Vec<usize>,
    sdp_dim: usize,
    lp_dim: usize,
}

impl BlockLayout {
    fn new(sizes: &[i64]) -> Result<BlockLayout> {
        let mut dense_offset = Vec::with_capacity(sizes.len());
        let mut diag_offset = Vec::with_capacity(sizes.len());
        let mut sdp_dim = 0usize;
        let mut lp_dim = 0usize;
        for &sz in sizes {
            if sz == 0 {
                return Err(Error::Parse("zero block size".into()));
            }
            if sz > 0 {
                dense_offset.push(sdp_dim);
                diag_offset.push(usize::MAX);
                sdp_dim += sz as usize;
            } else {
                dense_offset.push(usize::MAX);
                diag_offset.push(lp_dim);
                lp_dim += (-sz) as usize;
            }
        }
        Ok(BlockLayout {
            dense_offset,
            diag_offset,
            sdp_dim,
            lp_dim,
        })
    }

    fn is_dense(&self, block: usize) -> bool {
        self.dense_offset[block] != usize::MAX
    }
}

struct Cursor<'a> {
    tokens: Vec<&'a str>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self) -> Result<&'a str> {
        let t = self
            .tokens
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::Parse("truncated file".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn done(&self) -> bool {
        self.pos >= self.tokens.len()
    }
}

/// Parses `.dat-s` text. Comment lines start with `"` or `*`.
pub fn from_dat_s(text: &str) -> Result<SdpProblem> {
    let mut tokens: Vec<&str> = Vec::new();
    for line in text.lines() {
        let t = line.trim_start();
        if t.starts_with('"') || t.starts_with('*') {
            continue;
        }
        tokens.extend(
            line.split(|c: char| c.is_whitespace() || matches!(c, ',' | '{' | '}' | '(' | ')'))
                .filter(|t| !t.is_empty()),
        );
    }
    let mut cur = Cursor { tokens, pos: 0 };
    let m: usize = parse_num(cur.next()?, "constraint count")?;
    let nblocks: usize = parse_num(cur.next()?, "block count")?;
    let mut sizes = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        sizes.push(parse_num::<i64>(cur.next()?, "block size")?);
    }
    let layout = BlockLayout::new(&sizes)?;
    let mut cvals = Vec::with_capacity(m);
    for _ in 0..m {
        cvals.push(parse_num::<f64>(cur.next()?, "objective coefficient")?);
    }
    // (k, block) -> entry lists, gathered first so each matrix is built once.
    let mut sdp_entries: Vec<Vec<(u32, u32, f64)>> = vec![Vec::new(); m + 1];
    let mut lp_entries: Vec<Vec<(u32, f64)>> = vec![Vec::new(); m + 1];
    while !cur.done() {
        let k: usize = parse_num(cur.next()?, "matrix index")?;
        let blk: usize = parse_num(cur.next()?, "block index")?;
        let i: usize = parse_num(cur.next()?, "row index")?;
        let j: usize = parse_num(cur.next()?, "column index")?;
        let v: f64 = parse_num(cur.next()?, "entry value")?;
        if k > m {
            return Err(Error::Parse(format!("matrix index {k} out of range")));
        }
        if blk == 0 || blk > nblocks {
            return Err(Error::Parse(format!("block index {blk} out of range")));
        }
        if i == 0 || j == 0 {
            return Err(Error::Parse("entry indices are 1-based".into()));
        }
        let blk0 = blk - 1;
        let sz = sizes[blk0].unsigned_abs() as usize;
        if i > sz || j > sz {
            return Err(Error::Parse(format!(
                "entry ({i},{j}) outside block {blk} of size {sz}"
            )));
        }
        if layout.is_dense(blk0) {
            let off = layout.dense_offset[blk0];
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            sdp_entries[k].push(((off + a - 1) as u32, (off + b - 1) as u32, v));
        } else {
            if i != j {
                return Err(Error::Parse(format!(
                    "off-diagonal entry ({i},{j}) in diagonal block {blk}"
                )));
            }
            lp_entries[k].push(((layout.diag_offset[blk0] + i - 1) as u32, v));
        }
    }
    let mut mats: Vec<BlockMatrix> = sdp_entries
        .into_iter()
        .zip(lp_entries)
        .map(|(se, le)| BlockMatrix::new(SparseSym::from_upper(layout.sdp_dim, se), le))
        .collect();
    let objective = mats.remove(0);
    let constraints: Vec<(BlockMatrix, f64)> = mats.into_iter().zip(cvals).collect();
    let problem = SdpProblem {
        sdp_dim: layout.sdp_dim,
        lp_dim: layout.lp_dim,
        objective,
        constraints,
    };
    problem.validate()?;
    Ok(problem)
}

fn parse_num<T: std::str::FromStr>(token: &str, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what}: {token:?}")))
}
