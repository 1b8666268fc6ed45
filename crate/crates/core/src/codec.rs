//! Systematic binary linear block codes and the 12-bit track-health payload.
//!
//! Codewords are held in a `u64`. Transmitted bit `i` (0 = first on the air)
//! is value bit `n - 1 - i`, so the MSB-first wire order is simply the
//! integer read from the top. A systematic codeword is `message << (n - k)`
//! followed by its `n - k` parity bits.
//!
//! The default code is a (29,12) code correcting any 2 bit errors. It is
//! found by a seeded greedy search over the parity columns of `H = [Pᵀ | I]`:
//! a new column is accepted only if it is not the sum of `2t - 1` or fewer
//! columns already chosen, which makes every `2t` columns of `H` linearly
//! independent and therefore `d_min ≥ 2t + 1`. The result is then checked
//! by exhaustive enumeration of the codebook.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::rng;

/// Payload width carried by every frame.
pub const PAYLOAD_BITS: usize = 12;
/// Codeword length of the default code.
pub const DEFAULT_N: usize = 29;
/// Correction capability of the default code.
pub const DEFAULT_T: usize = 2;
/// Seed of the default code.
pub const DEFAULT_CODE_SEED: u64 = 42;

const MAX_N: usize = 63;
const MAX_K: usize = 32;
const MAX_REDUNDANCY: usize = 22;
const CONSTRUCTION_ATTEMPTS: u64 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("{field} = {value} exceeds maximum {max}")]
    FieldOverflow {
        field: &'static str,
        value: u32,
        max: u32,
    },
    #[error("invalid code parameters: {0}")]
    InvalidParameters(String),
    #[error("no ({n},{k}) code correcting {t} errors found after {attempts} attempts")]
    ConstructionFailed {
        n: usize,
        k: usize,
        t: usize,
        attempts: u64,
    },
    #[error("generator row {row} is not in systematic form")]
    NotSystematic { row: usize },
    #[error("minimum distance {d_min} is below the required {required}")]
    InsufficientDistance { d_min: u32, required: u32 },
    #[error("received word has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("uncorrectable word (syndrome {syndrome:#x})")]
    DecodeFailure { syndrome: u64 },
    #[error("code file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Packed `[addr:4][vib:7][good:1]` frame payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Payload12(u16);

impl Payload12 {
    pub const MAX: u16 = 0x0FFF;

    pub fn pack(addr: u8, vib: u8, good: u8) -> Result<Self, CodecError> {
        check_field("addr", addr, 15)?;
        check_field("vib", vib, 127)?;
        check_field("good", good, 1)?;
        Ok(Payload12(
            (u16::from(addr) << 8) | (u16::from(vib) << 1) | u16::from(good),
        ))
    }

    pub fn from_bits(bits: u16) -> Result<Self, CodecError> {
        if bits > Self::MAX {
            return Err(CodecError::FieldOverflow {
                field: "payload",
                value: u32::from(bits),
                max: u32::from(Self::MAX),
            });
        }
        Ok(Payload12(bits))
    }

    /// Returns `(addr, vib, good)`.
    pub fn unpack(self) -> (u8, u8, u8) {
        (self.addr(), self.vib(), self.good())
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn addr(self) -> u8 {
        (self.0 >> 8) as u8
    }

    pub fn vib(self) -> u8 {
        ((self.0 >> 1) & 0x7F) as u8
    }

    pub fn good(self) -> u8 {
        (self.0 & 1) as u8
    }

    /// Goodness flag set: both rails agree.
    pub fn is_safe(self) -> bool {
        self.good() == 1
    }
}

fn check_field(field: &'static str, value: u8, max: u8) -> Result<(), CodecError> {
    if value > max {
        Err(CodecError::FieldOverflow {
            field,
            value: u32::from(value),
            max: u32::from(max),
        })
    } else {
        Ok(())
    }
}

pub fn pack_payload(addr: u8, vib: u8, good: u8) -> Result<Payload12, CodecError> {
    Payload12::pack(addr, vib, good)
}

pub fn unpack_payload(payload: Payload12) -> (u8, u8, u8) {
    payload.unpack()
}

/// An `n`-bit word as sent on the air, most significant bit first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Codeword {
    bits: u64,
    n: u8,
}

impl Codeword {
    pub fn new(bits: u64, n: usize) -> Result<Self, CodecError> {
        if n == 0 || n > MAX_N || (bits >> n) != 0 {
            return Err(CodecError::LengthMismatch {
                expected: n,
                got: (64 - bits.leading_zeros()) as usize,
            });
        }
        Ok(Codeword { bits, n: n as u8 })
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        usize::from(self.n)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Bit `i` in transmission order.
    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len(), "bit index {i} out of range");
        (self.bits >> (self.len() - 1 - i)) & 1 == 1
    }

    /// Flips bit `i` in transmission order.
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len(), "bit index {i} out of range");
        self.bits ^= 1 << (self.len() - 1 - i);
    }

    /// XORs an error pattern given in the same bit layout as [`Codeword::bits`].
    pub fn with_errors(self, pattern: u64) -> Self {
        Codeword {
            bits: self.bits ^ (pattern & low_mask(self.len())),
            n: self.n,
        }
    }

    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn from_bit_str(s: &str) -> Result<Self, CodecError> {
        let n = s.len();
        if n == 0 || n > MAX_N {
            return Err(CodecError::LengthMismatch {
                expected: MAX_N,
                got: n,
            });
        }
        let bits = parse_bit_row(s).map_err(|msg| CodecError::Parse { line: 1, msg })?;
        Codeword::new(bits, n)
    }
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

fn low_mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

fn parity(x: u64) -> u64 {
    u64::from(x.count_ones() & 1)
}

/// A `k × n` generator matrix over GF(2), rows in the codeword bit layout.
///
/// Row `i` is the codeword of the message whose only set bit is message
/// bit `i` counted from the most significant end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorMatrix {
    n: usize,
    k: usize,
    rows: Vec<u64>,
}

impl GeneratorMatrix {
    pub fn new(n: usize, k: usize, rows: Vec<u64>) -> Result<Self, CodecError> {
        check_dimensions(n, k)?;
        if rows.len() != k {
            return Err(CodecError::InvalidParameters(format!(
                "expected {k} generator rows, got {}",
                rows.len()
            )));
        }
        if let Some(i) = rows.iter().position(|r| r >> n != 0) {
            return Err(CodecError::InvalidParameters(format!(
                "generator row {i} is wider than {n} bits"
            )));
        }
        Ok(GeneratorMatrix { n, k, rows })
    }

    /// Builds `[I_k | P]` from the `k` parity rows of `P`, each `n - k` bits.
    pub fn systematic(n: usize, k: usize, parity_rows: &[u64]) -> Result<Self, CodecError> {
        check_dimensions(n, k)?;
        let r = n - k;
        if parity_rows.len() != k {
            return Err(CodecError::InvalidParameters(format!(
                "expected {k} parity rows, got {}",
                parity_rows.len()
            )));
        }
        let rows = parity_rows
            .iter()
            .enumerate()
            .map(|(i, p)| (1u64 << (n - 1 - i)) | (p & low_mask(r)))
            .collect();
        GeneratorMatrix::new(n, k, rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn redundancy(&self) -> usize {
        self.n - self.k
    }

    /// `m · G` for a `k`-bit message.
    pub fn encode_bits(&self, message: u64) -> u64 {
        self.rows
            .iter()
            .enumerate()
            .filter(|(i, _)| (message >> (self.k - 1 - i)) & 1 == 1)
            .fold(0, |acc, (_, row)| acc ^ row)
    }

    pub fn is_systematic(&self) -> bool {
        self.first_non_systematic_row().is_none()
    }

    fn first_non_systematic_row(&self) -> Option<usize> {
        let r = self.redundancy();
        self.rows
            .iter()
            .enumerate()
            .position(|(i, row)| row >> r != 1u64 << (self.k - 1 - i))
    }

    /// Parity part `P` of a systematic generator, one `(n-k)`-bit row per message bit.
    fn parity_rows(&self) -> Vec<u64> {
        let mask = low_mask(self.redundancy());
        self.rows.iter().map(|row| row & mask).collect()
    }

    /// Rows of `H = [Pᵀ | I_{n-k}]`, each `n` bits, first row = syndrome MSB.
    ///
    /// Only meaningful for systematic generators.
    pub fn parity_check_rows(&self) -> Vec<u64> {
        let r = self.redundancy();
        let p = self.parity_rows();
        (0..r)
            .map(|j| {
                let sbit = r - 1 - j;
                let msg_part = p
                    .iter()
                    .enumerate()
                    .filter(|(_, pi)| (*pi >> sbit) & 1 == 1)
                    .fold(0u64, |acc, (i, _)| acc | (1 << (self.n - 1 - i)));
                msg_part | (1 << sbit)
            })
            .collect()
    }

    /// Computes `G · Hᵀ`; all-zero rows mean the pair is consistent.
    pub fn times_parity_check_transposed(&self, parity_check: &[u64]) -> Vec<u64> {
        self.rows
            .iter()
            .map(|g| {
                parity_check
                    .iter()
                    .fold(0u64, |acc, h| (acc << 1) | parity(g & h))
            })
            .collect()
    }

    /// Rank over GF(2).
    pub fn rank(&self) -> usize {
        let mut basis: Vec<u64> = Vec::new();
        for &row in &self.rows {
            let mut v = row;
            for &b in &basis {
                v = v.min(v ^ b);
            }
            if v != 0 {
                basis.push(v);
                basis.sort_unstable_by(|a, b| b.cmp(a));
            }
        }
        basis.len()
    }
}

fn check_dimensions(n: usize, k: usize) -> Result<(), CodecError> {
    if k == 0 || k >= n {
        return Err(CodecError::InvalidParameters(format!(
            "need n > k > 0, got n={n} k={k}"
        )));
    }
    if n > MAX_N {
        return Err(CodecError::InvalidParameters(format!(
            "n={n} exceeds the supported maximum {MAX_N}"
        )));
    }
    if k > MAX_K {
        return Err(CodecError::InvalidParameters(format!(
            "k={k} exceeds the supported maximum {MAX_K}"
        )));
    }
    Ok(())
}

/// Minimum Hamming weight over all `2^k - 1` nonzero codewords.
///
/// Walks the codebook in Gray-code order, one row XOR per step.
pub fn min_distance(generator: &GeneratorMatrix) -> u32 {
    let k = generator.k();
    let mut word = 0u64;
    let mut best = u32::MAX;
    for step in 1u64..(1u64 << k) {
        // bit that changes between gray(step - 1) and gray(step)
        let flip = step.trailing_zeros() as usize;
        word ^= generator.rows()[k - 1 - flip];
        best = best.min(word.count_ones());
    }
    best
}

/// Syndrome of an `n`-bit word under `H` given as rows.
fn syndrome_of(parity_check: &[u64], word: u64) -> u64 {
    parity_check
        .iter()
        .fold(0u64, |acc, h| (acc << 1) | parity(word & h))
}

/// Maps each syndrome of an error pattern of weight `≤ t` to the first
/// (lowest-weight) pattern producing it.
fn build_syndrome_table(n: usize, parity_check: &[u64], t: usize) -> HashMap<u64, u64> {
    let mut table = HashMap::new();
    for_each_pattern(n, t, |e| {
        table.entry(syndrome_of(parity_check, e)).or_insert(e);
    });
    table
}

/// Visits every `n`-bit pattern of weight `0..=t`, lighter patterns first.
fn for_each_pattern(n: usize, t: usize, mut visit: impl FnMut(u64)) {
    fn rec(n: usize, start: usize, left: usize, acc: u64, visit: &mut dyn FnMut(u64)) {
        if left == 0 {
            visit(acc);
            return;
        }
        for pos in start..n {
            rec(n, pos + 1, left - 1, acc | (1 << pos), visit);
        }
    }
    for w in 0..=t.min(n) {
        rec(n, 0, w, 0, &mut visit);
    }
}

/// Number of `n`-bit patterns of weight at most `t`.
pub fn patterns_up_to(n: usize, t: usize) -> u64 {
    let mut total = 0u64;
    let mut c = 1u64;
    for i in 0..=t.min(n) {
        total += c;
        c = c * (n - i) as u64 / (i as u64 + 1);
    }
    total
}

/// Verification summary of a generator matrix, valid or not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeReport {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub d_min: u32,
    /// Distinct syndromes among the correctable patterns.
    pub coverage: usize,
    /// All patterns of weight `≤ t`.
    pub patterns: u64,
}

impl CodeReport {
    pub fn corrects_t(&self) -> bool {
        self.d_min as usize > 2 * self.t && self.coverage as u64 == self.patterns
    }
}

impl fmt::Display for CodeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} k={} t={} d_min={} coverage={}/{}",
            self.n, self.k, self.t, self.d_min, self.coverage, self.patterns
        )
    }
}

/// Computes d_min and syndrome coverage without requiring a valid code.
pub fn inspect(generator: &GeneratorMatrix, t: usize) -> Result<CodeReport, CodecError> {
    if let Some(row) = generator.first_non_systematic_row() {
        return Err(CodecError::NotSystematic { row });
    }
    let h = generator.parity_check_rows();
    let table = build_syndrome_table(generator.n(), &h, t);
    Ok(CodeReport {
        n: generator.n(),
        k: generator.k(),
        t,
        d_min: min_distance(generator),
        coverage: table.len(),
        patterns: patterns_up_to(generator.n(), t),
    })
}

/// Result of a successful decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decoded {
    pub message: u64,
    pub corrected: u32,
}

/// A verified systematic code correcting `t` errors.
#[derive(Debug, Clone)]
pub struct LinearCode {
    generator: GeneratorMatrix,
    parity_check: Vec<u64>,
    syndrome_table: HashMap<u64, u64>,
    t: usize,
    d_min: u32,
}

impl LinearCode {
    /// Wraps a systematic generator, rejecting it unless `d_min ≥ 2t + 1`.
    pub fn from_generator(generator: GeneratorMatrix, t: usize) -> Result<Self, CodecError> {
        if let Some(row) = generator.first_non_systematic_row() {
            return Err(CodecError::NotSystematic { row });
        }
        let d_min = min_distance(&generator);
        let required = (2 * t + 1) as u32;
        if d_min < required {
            return Err(CodecError::InsufficientDistance { d_min, required });
        }
        let parity_check = generator.parity_check_rows();
        let syndrome_table = build_syndrome_table(generator.n(), &parity_check, t);
        Ok(LinearCode {
            generator,
            parity_check,
            syndrome_table,
            t,
            d_min,
        })
    }

    /// The (29,12) double-error-correcting code used on the wire.
    pub fn default_code() -> Self {
        build_code(PAYLOAD_BITS, DEFAULT_N, DEFAULT_T, DEFAULT_CODE_SEED)
            .expect("default (29,12,2) parameters are feasible")
    }

    pub fn n(&self) -> usize {
        self.generator.n()
    }

    pub fn k(&self) -> usize {
        self.generator.k()
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Exhaustively verified minimum distance.
    pub fn d_min(&self) -> u32 {
        self.d_min
    }

    pub fn generator(&self) -> &GeneratorMatrix {
        &self.generator
    }

    pub fn parity_check(&self) -> &[u64] {
        &self.parity_check
    }

    pub fn syndrome_table_len(&self) -> usize {
        self.syndrome_table.len()
    }

    pub fn coset_leader(&self, syndrome: u64) -> Option<u64> {
        self.syndrome_table.get(&syndrome).copied()
    }

    pub fn syndrome(&self, received: &Codeword) -> u64 {
        syndrome_of(&self.parity_check, received.bits())
    }

    /// # Panics
    ///
    /// If `message` does not fit in `k` bits.
    pub fn encode(&self, message: u64) -> Codeword {
        assert!(
            message >> self.k() == 0,
            "message {message:#x} wider than k={}",
            self.k()
        );
        Codeword {
            bits: self.generator.encode_bits(message),
            n: self.n() as u8,
        }
    }

    /// # Panics
    ///
    /// If the code dimension is smaller than the 12-bit payload.
    pub fn encode_payload(&self, payload: Payload12) -> Codeword {
        self.encode(u64::from(payload.bits()))
    }

    pub fn decode(&self, received: &Codeword) -> Result<Decoded, CodecError> {
        if received.len() != self.n() {
            return Err(CodecError::LengthMismatch {
                expected: self.n(),
                got: received.len(),
            });
        }
        let syndrome = self.syndrome(received);
        let error = self
            .coset_leader(syndrome)
            .ok_or(CodecError::DecodeFailure { syndrome })?;
        let corrected = received.bits() ^ error;
        Ok(Decoded {
            message: corrected >> self.generator.redundancy(),
            corrected: error.count_ones(),
        })
    }

    pub fn decode_payload(&self, received: &Codeword) -> Result<(Payload12, u32), CodecError> {
        let decoded = self.decode(received)?;
        let bits = u16::try_from(decoded.message).map_err(|_| CodecError::FieldOverflow {
            field: "payload",
            value: u32::MAX,
            max: u32::from(Payload12::MAX),
        })?;
        Ok((Payload12::from_bits(bits)?, decoded.corrected))
    }

    pub fn report(&self) -> CodeReport {
        CodeReport {
            n: self.n(),
            k: self.k(),
            t: self.t,
            d_min: self.d_min,
            coverage: self.syndrome_table.len(),
            patterns: patterns_up_to(self.n(), self.t),
        }
    }

    /// Serializes to the text code format: `n k t`, then `k` rows of `0`/`1`.
    pub fn to_text(&self) -> String {
        generator_to_text(&self.generator, self.t)
    }
}

/// Deterministic seeded construction of a systematic `(n, k)` code with
/// `d_min ≥ 2t + 1`.
pub fn build_code(k: usize, n: usize, t: usize, seed: u64) -> Result<LinearCode, CodecError> {
    check_dimensions(n, k)?;
    let r = n - k;
    if r > MAX_REDUNDANCY {
        return Err(CodecError::InvalidParameters(format!(
            "n-k={r} exceeds the supported maximum {MAX_REDUNDANCY}"
        )));
    }
    let required = 2 * t + 1;
    for attempt in 0..CONSTRUCTION_ATTEMPTS {
        let mut rng = rng::substream(seed, attempt);
        let Some(parity_rows) = greedy_parity_columns(k, r, required, &mut rng) else {
            continue;
        };
        let generator = GeneratorMatrix::systematic(n, k, &parity_rows)?;
        match LinearCode::from_generator(generator, t) {
            Ok(code) => return Ok(code),
            Err(CodecError::InsufficientDistance { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(CodecError::ConstructionFailed {
        n,
        k,
        t,
        attempts: CONSTRUCTION_ATTEMPTS,
    })
}

/// Picks `k` columns of `Pᵀ` such that no `d - 1` columns of `[Pᵀ | I]` sum
/// to zero. Returns `None` when the candidate pool runs dry.
fn greedy_parity_columns(k: usize, r: usize, d: usize, rng: &mut impl Rng) -> Option<Vec<u64>> {
    let space = 1usize << r;
    // sums[j] holds the distinct values of XORs of exactly j chosen columns,
    // for j up to d - 2; a candidate equal to any of them is forbidden.
    let depth = d.saturating_sub(2);
    let mut sums: Vec<Vec<u32>> = vec![Vec::new(); depth + 1];
    let mut seen: Vec<Vec<bool>> = vec![vec![false; space]; depth + 1];
    let mut forbidden = vec![false; space];
    if d >= 2 {
        sums[0].push(0);
        seen[0][0] = true;
        forbidden[0] = true;
    }

    let mut add_column = |c: u32, sums: &mut Vec<Vec<u32>>, forbidden: &mut Vec<bool>| {
        for j in (1..=depth).rev() {
            let fresh: Vec<u32> = sums[j - 1].iter().map(|x| x ^ c).collect();
            for v in fresh {
                if !seen[j][v as usize] {
                    seen[j][v as usize] = true;
                    sums[j].push(v);
                    forbidden[v as usize] = true;
                }
            }
        }
    };

    for j in 0..r {
        add_column(1 << j, &mut sums, &mut forbidden);
    }

    let mut columns = Vec::with_capacity(k);
    for _ in 0..k {
        let candidates: Vec<u32> = (0..space as u32)
            .filter(|&v| !forbidden[v as usize])
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let c = candidates[rng.random_range(0..candidates.len())];
        add_column(c, &mut sums, &mut forbidden);
        columns.push(u64::from(c));
    }
    Some(columns)
}

fn parse_bit_row(s: &str) -> Result<u64, String> {
    s.chars().try_fold(0u64, |acc, ch| match ch {
        '0' => Ok(acc << 1),
        '1' => Ok((acc << 1) | 1),
        other => Err(format!("unexpected character {other:?}")),
    })
}

/// Parses the text code format into a generator and its target `t`.
pub fn parse_code_text(text: &str) -> Result<(GeneratorMatrix, usize), CodecError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(CodecError::Parse {
        line: 1,
        msg: "empty code file".into(),
    })?;
    let fields: Vec<usize> = header
        .split_whitespace()
        .map(|f| f.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| CodecError::Parse {
            line: hline,
            msg: format!("header: {e}"),
        })?;
    let [n, k, t] = fields[..] else {
        return Err(CodecError::Parse {
            line: hline,
            msg: format!("header must be \"n k t\", got {} fields", fields.len()),
        });
    };
    check_dimensions(n, k)?;
    let mut rows = Vec::with_capacity(k);
    for (line, row) in lines {
        if row.len() != n {
            return Err(CodecError::Parse {
                line,
                msg: format!("row has {} bits, expected {n}", row.len()),
            });
        }
        rows.push(parse_bit_row(row).map_err(|msg| CodecError::Parse { line, msg })?);
    }
    if rows.len() != k {
        return Err(CodecError::Parse {
            line: hline,
            msg: format!("expected {k} generator rows, found {}", rows.len()),
        });
    }
    Ok((GeneratorMatrix::new(n, k, rows)?, t))
}

pub fn generator_to_text(generator: &GeneratorMatrix, t: usize) -> String {
    let n = generator.n();
    let mut out = format!("{} {} {}\n", n, generator.k(), t);
    for row in generator.rows() {
        out.push_str(&format!("{row:0n$b}\n"));
    }
    out
}
