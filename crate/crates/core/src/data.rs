//! Dataset ingestion (CSV, PGM), synthetic generators and vertical
//! partitioning.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use rand::distr::Uniform;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix};

/// Contiguous column ranges assigned to each client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    pub ranges: Vec<Range<usize>>,
}

impl PartitionPlan {
    /// Equal split of `m` columns over `p` clients; the first `m mod p`
    /// clients get one extra column.
    pub fn equal(m: usize, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("p must be >= 1".into()));
        }
        if p > m {
            return Err(Error::TooManyClients { p, m });
        }
        let base = m / p;
        let extra = m % p;
        let mut start = 0;
        let ranges = (0..p)
            .map(|i| {
                let len = base + usize::from(i < extra);
                let r = start..start + len;
                start += len;
                r
            })
            .collect();
        Ok(Self { ranges })
    }

    pub fn client_count(&self) -> usize {
        self.ranges.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }
}

/// Splits the columns of `x` into `p` contiguous blocks.
pub fn partition_features(x: &DenseMatrix, p: usize) -> Result<(PartitionPlan, Vec<DenseMatrix>)> {
    let plan = PartitionPlan::equal(x.cols(), p)?;
    let blocks = plan
        .ranges
        .iter()
        .map(|r| x.column_block(r.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok((plan, blocks))
}

/// Seeded column shuffle; returns the permuted matrix and the source column
/// of every output column.
pub fn permute_columns(x: &DenseMatrix, seed: u64) -> (DenseMatrix, Vec<usize>) {
    let mut order: Vec<usize> = (0..x.cols()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut data = Vec::with_capacity(x.rows() * x.cols());
    for row in x.row_iter() {
        data.extend(order.iter().map(|&j| row[j]));
    }
    (
        DenseMatrix::from_vec_unchecked(x.rows(), x.cols(), data),
        order,
    )
}

/// Shifts every column to zero mean and scales it to unit population
/// variance. Constant columns are only centered.
pub fn standardize_columns(x: &DenseMatrix) -> DenseMatrix {
    let (n, m) = x.shape();
    if n == 0 {
        return x.clone();
    }
    let nf = n as f64;
    let mut means = vec![0.0; m];
    for row in x.row_iter() {
        means.iter_mut().zip(row).for_each(|(a, v)| *a += v);
    }
    means.iter_mut().for_each(|a| *a /= nf);
    let mut vars = vec![0.0; m];
    for row in x.row_iter() {
        for ((s, v), mu) in vars.iter_mut().zip(row).zip(&means) {
            *s += (v - mu) * (v - mu);
        }
    }
    let stds: Vec<f64> = vars.iter().map(|s| (s / nf).sqrt()).collect();
    let mut data = Vec::with_capacity(n * m);
    for row in x.row_iter() {
        data.extend(row.iter().zip(&means).zip(&stds).map(|((v, mu), sd)| {
            let centered = v - mu;
            if *sd > 0.0 {
                centered / sd
            } else {
                0.0
            }
        }));
    }
    DenseMatrix::from_vec_unchecked(n, m, data)
}

/// Parses a comma-separated numeric table. `origin` only labels errors.
pub fn parse_csv(text: &str, has_header: bool, origin: &str) -> Result<DenseMatrix> {
    let err = |line: usize, col: Option<usize>, msg: String| Error::Csv {
        path: origin.to_string(),
        line,
        col,
        msg,
    };
    let mut width = None;
    let mut rows = 0;
    let mut data = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    if has_header && lines.next().is_none() {
        return Err(err(1, None, "empty file".into()));
    }
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0;
        for (c, cell) in line.split(',').enumerate() {
            let cell = cell.trim();
            if cell.contains('"') || cell.contains('\'') {
                return Err(err(
                    line_no,
                    Some(c + 1),
                    "quoted fields are not supported".into(),
                ));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| err(line_no, Some(c + 1), format!("not a number: {cell:?}")))?;
            if !v.is_finite() {
                return Err(err(
                    line_no,
                    Some(c + 1),
                    format!("non-finite value {cell:?}"),
                ));
            }
            data.push(v);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(err(
                    line_no,
                    None,
                    format!("ragged row: {count} fields, expected {w}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let Some(cols) = width else {
        return Err(err(1, None, "empty file".into()));
    };
    DenseMatrix::new(rows, cols, data)
}

pub fn load_csv(
    path: impl AsRef<Path>,
    has_header: bool,
    standardize: bool,
) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let x = parse_csv(&text, has_header, &path.display().to_string())?;
    Ok(if standardize {
        standardize_columns(&x)
    } else {
        x
    })
}

/// Writes `x` as CSV with an optional header. Numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(
    mut out: W,
    x: &DenseMatrix,
    header: Option<&[String]>,
) -> std::io::Result<()> {
    if let Some(h) = header {
        writeln!(out, "{}", h.join(","))?;
    }
    for row in x.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

fn gaussian_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    (-(x - mu) * (x - mu) / (2.0 * sigma * sigma)).exp() / ((2.0 * PI).sqrt() * sigma)
}

fn columns_to_matrix(n: usize, m: usize, column_major: &[f64]) -> DenseMatrix {
    const TILE: usize = 64;
    let mut data = vec![0.0; n * m];
    for j0 in (0..m).step_by(TILE) {
        for i0 in (0..n).step_by(TILE) {
            for j in j0..(j0 + TILE).min(m) {
                for i in i0..(i0 + TILE).min(n) {
                    data[i * m + j] = column_major[j * n + i];
                }
            }
        }
    }
    DenseMatrix::from_vec_unchecked(n, m, data)
}

/// Every feature is the standard normal density evaluated at `n` points drawn
/// uniformly from `(−3, 3)`.
pub fn synth_single_gaussian(n: usize, m: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = Uniform::new(-3.0, 3.0).expect("valid range");
    let mut cols = Vec::with_capacity(n * m);
    for _ in 0..m {
        cols.extend((0..n).map(|_| gaussian_pdf(rng.sample(points), 0.0, 1.0)));
    }
    columns_to_matrix(n, m, &cols)
}

/// Feature `j` is the density of `N(μⱼ, σⱼ²)` at `n` points drawn uniformly
/// from `(μⱼ − 3σⱼ, μⱼ + 3σⱼ)`, with `μⱼ, σⱼ` drawn from `{0, …, m}` and `σⱼ`
/// redrawn until it is at least 1.
pub fn synth_mixture_gaussian(n: usize, m: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = Vec::with_capacity(n * m);
    for _ in 0..m {
        let mu = rng.random_range(0..=m) as f64;
        let sigma = loop {
            let s = rng.random_range(0..=m);
            if s >= 1 {
                break s as f64;
            }
        };
        let points = Uniform::new(mu - 3.0 * sigma, mu + 3.0 * sigma).expect("valid range");
        cols.extend((0..n).map(|_| gaussian_pdf(rng.sample(points), mu, sigma)));
    }
    columns_to_matrix(n, m, &cols)
}

/// Symmetric PSD matrix `Q diag(spectrum) Qᵀ` with a seeded random orthogonal
/// `Q`. Returns the matrix and `Q`, whose column `i` is the eigenvector for
/// `spectrum[i]`.
pub fn planted_psd(spectrum: &[f64], seed: u64) -> (DenseMatrix, DenseMatrix) {
    let n = spectrum.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let len = dot(&v, &v).sqrt();
        if len > 1e-8 {
            basis.push(v.into_iter().map(|x| x / len).collect());
        }
    }
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..n)
                .map(|k| basis[k][i] * spectrum[k] * basis[k][j])
                .sum();
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let mut q = DenseMatrix::zeros(n, n);
    for (k, b) in basis.iter().enumerate() {
        for (i, &x) in b.iter().enumerate() {
            q[(i, k)] = x;
        }
    }
    (a, q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmEncoding {
    /// `P2`
    Ascii,
    /// `P5`
    Binary,
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a str,
}

impl PgmCursor<'_> {
    fn error(&self, msg: impl Into<String>) -> Error {
        Error::Pgm {
            path: self.origin.to_string(),
            offset: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if self.pos >= self.bytes.len() {
                self.error(format!("truncated: missing {what}"))
            } else {
                self.error(format!("expected {what}"))
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Pgm {
                path: self.origin.to_string(),
                offset: start,
                msg: format!("{what} out of range"),
            })
    }
}

/// Decodes a single P2 or P5 image into a matrix with entries `v / maxval`.
pub fn parse_pgm(bytes: &[u8], origin: &str) -> Result<DenseMatrix> {
    let mut cur = PgmCursor {
        bytes,
        pos: 0,
        origin,
    };
    let encoding = match bytes.get(..2) {
        Some(b"P2") => PgmEncoding::Ascii,
        Some(b"P5") => PgmEncoding::Binary,
        _ => return Err(cur.error("bad magic, expected P2 or P5")),
    };
    cur.pos = 2;
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(cur.error(format!("maxval {maxval} outside 1..=65535")));
    }
    let count = width * height;
    let scale = maxval as f64;
    let mut data = Vec::with_capacity(count);
    match encoding {
        PgmEncoding::Ascii => {
            for _ in 0..count {
                let v = cur.number("pixel value")?;
                if v > maxval {
                    return Err(cur.error(format!("pixel value {v} exceeds maxval {maxval}")));
                }
                data.push(v as f64 / scale);
            }
        }
        PgmEncoding::Binary => {
            if !cur.bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
                return Err(cur.error("expected a single whitespace byte before raster"));
            }
            cur.pos += 1;
            let wide = maxval > 255;
            let needed = count * if wide { 2 } else { 1 };
            let raster = bytes
                .get(cur.pos..cur.pos + needed)
                .ok_or_else(|| Error::Pgm {
                    path: origin.to_string(),
                    offset: bytes.len(),
                    msg: format!("truncated raster: need {needed} bytes"),
                })?;
            for (i, chunk) in raster.chunks(if wide { 2 } else { 1 }).enumerate() {
                let v = if wide {
                    u16::from_be_bytes([chunk[0], chunk[1]]) as u64
                } else {
                    chunk[0] as u64
                };
                if v > maxval {
                    return Err(Error::Pgm {
                        path: origin.to_string(),
                        offset: cur.pos + i * chunk.len(),
                        msg: format!("pixel value {v} exceeds maxval {maxval}"),
                    });
                }
                data.push(v as f64 / scale);
            }
        }
    }
    DenseMatrix::new(height, width, data)
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes, &path.display().to_string())
}

/// Loads several same-sized images and flattens each into one row.
pub fn load_pgm_rows<P: AsRef<Path>>(paths: &[P]) -> Result<DenseMatrix> {
    let mut rows = Vec::with_capacity(paths.len());
    for p in paths {
        rows.push(load_pgm(p)?.into_vec());
    }
    if rows.is_empty() {
        return Err(Error::EmptyBlock);
    }
    DenseMatrix::from_rows(&rows)
}

/// Encodes `image` (entries expected in `[0, 1]`, clamped otherwise) with
/// the given `maxval`.
pub fn encode_pgm(image: &DenseMatrix, maxval: u16, encoding: PgmEncoding) -> Result<Vec<u8>> {
    if maxval == 0 {
        return Err(Error::InvalidArgument("maxval must be >= 1".into()));
    }
    let quantized: Vec<u16> = image
        .as_slice()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * maxval as f64).round() as u16)
        .collect();
    let (h, w) = image.shape();
    let mut out = Vec::new();
    match encoding {
        PgmEncoding::Ascii => {
            out.extend_from_slice(format!("P2\n{w} {h}\n{maxval}\n").as_bytes());
            for row in quantized.chunks(w.max(1)) {
                let line: Vec<String> = row.iter().map(u16::to_string).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
        PgmEncoding::Binary => {
            out.extend_from_slice(format!("P5\n{w} {h}\n{maxval}\n").as_bytes());
            for v in quantized {
                if maxval > 255 {
                    out.extend_from_slice(&v.to_be_bytes());
                } else {
                    out.push(v as u8);
                }
            }
        }
    }
    Ok(out)
}

pub fn write_pgm(
    path: impl AsRef<Path>,
    image: &DenseMatrix,
    maxval: u16,
    encoding: PgmEncoding,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pgm(image, maxval, encoding)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
