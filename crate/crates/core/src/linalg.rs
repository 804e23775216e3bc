//! Exact linear algebra over arbitrary-precision rationals.
//!
//! Ideality of a network is a rank condition, so float tolerances are useless
//! here: everything in this module is exact. The rational routines carry
//! optional combination tracking so that span membership comes with an explicit
//! certificate. For large integer matrices there are two cheaper layers: an
//! integer echelon with gcd normalization, and a one-sided modular filter that
//! can often settle membership without touching big integers at all.

use crate::rat::Rat;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinalgError {
    #[error("rows have inconsistent lengths ({found} vs {expected})")]
    RaggedRows { found: usize, expected: usize },
    #[error("dimension mismatch: {left_rows}x{left_cols} * {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("matrix is singular")]
    Singular,
    #[error("expected a square system, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("right-hand side has length {found}, expected {expected}")]
    RhsLength { found: usize, expected: usize },
}

/// Dense rational matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rat>,
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix {
            rows,
            cols,
            data: vec![Rat::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Rat::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, |r| r.len());
        for r in &rows {
            if r.len() != cols {
                return Err(LinalgError::RaggedRows {
                    found: r.len(),
                    expected: cols,
                });
            }
        }
        let n_rows = rows.len();
        let data = rows.into_iter().flatten().collect();
        Ok(RatMatrix {
            rows: n_rows,
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rat {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Rat) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[Rat] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[Rat]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].clone();
            }
        }
        out
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: rhs.rows,
                right_cols: rhs.cols,
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs.get(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let cur = out.get(i, j).clone();
                    out.set(i, j, cur + a * b);
                }
            }
        }
        Ok(out)
    }

    /// self * diag(d), scaling column j by d[j].
    pub fn scale_cols(&self, d: &[Rat]) -> Result<Self, LinalgError> {
        if d.len() != self.cols {
            return Err(LinalgError::RhsLength {
                found: d.len(),
                expected: self.cols,
            });
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            for (j, dj) in d.iter().enumerate() {
                if !out.get(i, j).is_zero() {
                    let v = out.get(i, j) * dj;
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    pub fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in 0..i {
                if self.get(i, j) != self.get(j, i) {
                    return false;
                }
            }
        }
        true
    }
}

pub fn dot(a: &[Rat], b: &[Rat]) -> Rat {
    let mut acc = Rat::zero();
    for (x, y) in a.iter().zip(b) {
        if !x.is_zero() && !y.is_zero() {
            acc += x * y;
        }
    }
    acc
}

/// Weighted inner product sum_l a[l] * b[l] * scale[l], skipping zero terms.
pub fn dot_scaled(a: &[Rat], b: &[Rat], scale: &[Rat]) -> Rat {
    let mut acc = Rat::zero();
    for l in 0..a.len() {
        if !a[l].is_zero() && !b[l].is_zero() {
            acc += &a[l] * &b[l] * &scale[l];
        }
    }
    acc
}

struct PivotRow {
    col: usize,
    row: Vec<Rat>,
    /// Coefficients over the rows inserted so far (shorter vectors are
    /// implicitly zero-padded); only filled in when tracking is on.
    combo: Vec<Rat>,
}

/// Incremental reduced row echelon form over the rationals.
///
/// Rows are inserted one at a time; each insertion reports whether the row was
/// independent of everything before it. With tracking enabled, [`Echelon::express`]
/// additionally returns the coefficients that write a member of the span as a
/// combination of the inserted rows, which is exactly the certificate format
/// the ideality analysis hands back to callers.
pub struct Echelon {
    cols: usize,
    pivots: Vec<PivotRow>,
    inserted: usize,
    track: bool,
}

impl Echelon {
    pub fn new(cols: usize) -> Self {
        Echelon {
            cols,
            pivots: Vec::new(),
            inserted: 0,
            track: false,
        }
    }

    pub fn with_tracking(cols: usize) -> Self {
        Echelon {
            track: true,
            ..Self::new(cols)
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn inserted(&self) -> usize {
        self.inserted
    }

    /// Residual of `target` against the current basis, plus (when tracking)
    /// the combination of inserted rows that was subtracted out.
    fn reduce(&self, target: &[Rat]) -> (Vec<Rat>, Vec<Rat>) {
        assert_eq!(target.len(), self.cols, "row length mismatch");
        let mut residual = target.to_vec();
        let mut combo = if self.track {
            vec![Rat::zero(); self.inserted]
        } else {
            Vec::new()
        };
        for p in &self.pivots {
            let c = residual[p.col].clone();
            if c.is_zero() {
                continue;
            }
            for (r, v) in residual.iter_mut().zip(&p.row) {
                if !v.is_zero() {
                    *r -= &c * v;
                }
            }
            if self.track {
                for (acc, v) in combo.iter_mut().zip(&p.combo) {
                    if !v.is_zero() {
                        *acc += &c * v;
                    }
                }
            }
        }
        (residual, combo)
    }

    /// Inserts a row; returns true when it enlarged the span.
    pub fn insert(&mut self, row: &[Rat]) -> bool {
        let (mut residual, combo) = self.reduce(row);
        let index = self.inserted;
        self.inserted += 1;
        let Some(lead) = residual.iter().position(|v| !v.is_zero()) else {
            return false;
        };
        let scale = residual[lead].clone();
        for v in residual.iter_mut() {
            if !v.is_zero() {
                *v /= &scale;
            }
        }
        let mut new_combo = Vec::new();
        if self.track {
            new_combo = combo;
            new_combo.resize(index + 1, Rat::zero());
            for v in new_combo.iter_mut() {
                if !v.is_zero() {
                    *v = -(&*v / &scale);
                }
            }
            new_combo[index] = Rat::one() / &scale;
        }
        // Keep the form reduced so membership checks are a single pass:
        // clear the new pivot column from every existing basis row.
        for p in self.pivots.iter_mut() {
            let c = p.row[lead].clone();
            if c.is_zero() {
                continue;
            }
            for (r, v) in p.row.iter_mut().zip(&residual) {
                if !v.is_zero() {
                    *r -= &c * v;
                }
            }
            if self.track {
                p.combo.resize(index + 1, Rat::zero());
                for (acc, v) in p.combo.iter_mut().zip(&new_combo) {
                    if !v.is_zero() {
                        *acc -= &c * v;
                    }
                }
            }
        }
        self.pivots.push(PivotRow {
            col: lead,
            row: residual,
            combo: new_combo,
        });
        true
    }

    pub fn contains(&self, target: &[Rat]) -> bool {
        let (residual, _) = self.reduce(target);
        residual.iter().all(Rat::is_zero)
    }

    /// If `target` lies in the span, returns coefficients `c` (one per inserted
    /// row, in insertion order) with `target = sum_i c[i] * row_i`. Requires a
    /// tracking echelon.
    pub fn express(&self, target: &[Rat]) -> Option<Vec<Rat>> {
        assert!(self.track, "express() needs Echelon::with_tracking");
        let (residual, mut combo) = self.reduce(target);
        if residual.iter().any(|v| !v.is_zero()) {
            return None;
        }
        combo.resize(self.inserted, Rat::zero());
        Some(combo)
    }

    /// The reduced basis rows (spanning the same space as the inserted rows).
    pub fn basis_rows(&self) -> Vec<Vec<Rat>> {
        self.pivots.iter().map(|p| p.row.clone()).collect()
    }
}

/// Clears a rational row's denominators: multiplies by the lcm so the
/// entries become integers spanning the same line.
pub fn integerize_row(row: &[Rat]) -> Vec<BigInt> {
    integerize_row_scaled(row).0
}

/// Like [`integerize_row`], but also returns the multiplier that was applied.
pub fn integerize_row_scaled(row: &[Rat]) -> (Vec<BigInt>, BigInt) {
    let mut lcm = BigInt::one();
    for v in row {
        if !v.is_zero() {
            lcm = lcm.lcm(v.denom());
        }
    }
    let ints = row
        .iter()
        .map(|v| {
            if v.is_zero() {
                BigInt::zero()
            } else {
                v.numer() * (&lcm / v.denom())
            }
        })
        .collect();
    (ints, lcm)
}

/// Solves A x = b exactly. Elimination is fraction-free (Bareiss) on the
/// row-integerized augmented matrix: intermediate entries are minors of the
/// input, every division is exact, and no per-operation gcds occur. Row
/// swaps pick the first usable pivot, so a column with no remaining nonzero
/// entry means the matrix is singular.
pub fn solve_square(a: &RatMatrix, b: &[Rat]) -> Result<Vec<Rat>, LinalgError> {
    let mut solutions = solve_square_multi(a, std::slice::from_ref(&b.to_vec()))?;
    Ok(solutions.pop().expect("one solution per right-hand side"))
}

/// Solves a * x = b for several right-hand sides with one elimination.
///
/// Fraction-free Bareiss on the denominator-cleared augmented matrix: every
/// intermediate entry is a minor of that integer matrix, so the divisions
/// are exact and no per-operation gcd reduction happens. Each right-hand
/// side is cleared by its own multiplier first, which keeps its entries from
/// inflating the matrix rows' lcms.
pub fn solve_square_multi(a: &RatMatrix, bs: &[Vec<Rat>]) -> Result<Vec<Vec<Rat>>, LinalgError> {
    if a.rows() != a.cols() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    for b in bs {
        if b.len() != n {
            return Err(LinalgError::RhsLength {
                found: b.len(),
                expected: n,
            });
        }
    }
    if n == 0 {
        return Ok(vec![Vec::new(); bs.len()]);
    }
    let scaled: Vec<(Vec<BigInt>, BigInt)> =
        bs.iter().map(|b| integerize_row_scaled(b)).collect();
    let width = n + bs.len();
    let mut m: Vec<Vec<BigInt>> = (0..n)
        .map(|i| {
            let (mut row, lcm) = integerize_row_scaled(a.row(i));
            row.extend(scaled.iter().map(|(b, _)| &b[i] * &lcm));
            row
        })
        .collect();
    let mut prev = BigInt::one();
    for k in 0..n {
        let Some(pr) = (k..n).find(|&r| !m[r][k].is_zero()) else {
            return Err(LinalgError::Singular);
        };
        m.swap(k, pr);
        let (top, rest) = m.split_at_mut(k + 1);
        let pivot_row = &top[k];
        for row in rest.iter_mut() {
            if row[k].is_zero() {
                // Still rescale to keep the minor invariant intact.
                for entry in &mut row[(k + 1)..width] {
                    if !entry.is_zero() {
                        let val = &pivot_row[k] * &*entry;
                        *entry = val / &prev;
                    }
                }
                continue;
            }
            let factor = std::mem::take(&mut row[k]);
            for j in (k + 1)..width {
                let val = &pivot_row[k] * &row[j] - &factor * &pivot_row[j];
                row[j] = val / &prev;
            }
        }
        prev = top[k][k].clone();
    }
    let solutions = (0..bs.len())
        .map(|t| {
            let col = n + t;
            let mut x = vec![Rat::zero(); n];
            for i in (0..n).rev() {
                let mut acc = Rat::from_integer(m[i][col].clone());
                for j in (i + 1)..n {
                    if !m[i][j].is_zero() && !x[j].is_zero() {
                        acc -= Rat::from_integer(m[i][j].clone()) * &x[j];
                    }
                }
                x[i] = acc / Rat::from_integer(m[i][i].clone());
            }
            // The whole column was solved against the cleared right-hand
            // side; undo its multiplier at the end.
            let s = Rat::from_integer(scaled[t].1.clone());
            for v in &mut x {
                if !v.is_zero() {
                    *v /= &s;
                }
            }
            x
        })
        .collect();
    Ok(solutions)
}

/// Integer row echelon with per-row gcd normalization. Rank and row-space
/// membership agree with the rational answers (scaling rows never changes the
/// span), but the arithmetic stays in `BigInt`.
pub struct IntEchelon {
    cols: usize,
    pivots: Vec<(usize, Vec<BigInt>)>,
}

impl IntEchelon {
    pub fn new(cols: usize) -> Self {
        IntEchelon {
            cols,
            pivots: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    fn normalize(row: &mut [BigInt]) {
        let mut g = BigInt::zero();
        for v in row.iter() {
            if !v.is_zero() {
                g = g.gcd(v);
            }
        }
        if g.is_zero() {
            return;
        }
        let lead_negative = row
            .iter()
            .find(|v| !v.is_zero())
            .map(|v| v.is_negative())
            .unwrap_or(false);
        if lead_negative {
            g = -g;
        }
        if !g.is_one() {
            for v in row.iter_mut() {
                if !v.is_zero() {
                    *v /= &g;
                }
            }
        }
    }

    fn reduce(&self, target: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(target.len(), self.cols, "row length mismatch");
        let mut t = target.to_vec();
        for (col, row) in &self.pivots {
            if t[*col].is_zero() {
                continue;
            }
            let a = row[*col].clone();
            let b = t[*col].clone();
            for (tv, rv) in t.iter_mut().zip(row) {
                let scaled = &*tv * &a;
                *tv = if rv.is_zero() { scaled } else { scaled - &b * rv };
            }
            Self::normalize(&mut t);
        }
        t
    }

    pub fn insert(&mut self, row: &[BigInt]) -> bool {
        let mut residual = self.reduce(row);
        let Some(lead) = residual.iter().position(|v| !v.is_zero()) else {
            return false;
        };
        Self::normalize(&mut residual);
        // Clear the new pivot column from existing rows to keep reductions
        // single-pass, mirroring the rational echelon.
        let pivot_val = residual[lead].clone();
        for (_, row) in self.pivots.iter_mut() {
            if row[lead].is_zero() {
                continue;
            }
            let b = row[lead].clone();
            for (rv, nv) in row.iter_mut().zip(&residual) {
                let scaled = &*rv * &pivot_val;
                *rv = if nv.is_zero() { scaled } else { scaled - &b * nv };
            }
            Self::normalize(row);
        }
        self.pivots.push((lead, residual));
        true
    }

    pub fn contains(&self, target: &[BigInt]) -> bool {
        self.reduce(target).iter().all(BigInt::is_zero)
    }
}

/// 2^61 - 1, a Mersenne prime; chosen so products fit in u128 comfortably.
pub const FILTER_PRIME: u64 = 0x1fff_ffff_ffff_ffff;

fn mul_mod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % FILTER_PRIME as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base);
        }
        base = mul_mod(base, base);
        exp >>= 1;
    }
    acc
}

fn inv_mod(a: u64) -> u64 {
    debug_assert!(!a.is_multiple_of(FILTER_PRIME));
    pow_mod(a % FILTER_PRIME, FILTER_PRIME - 2)
}

pub fn bigint_mod_filter_prime(v: &BigInt) -> u64 {
    let p = BigInt::from(FILTER_PRIME);
    let mut r = v % &p;
    if r.is_negative() {
        r += &p;
    }
    r.to_u64().expect("residue fits in u64")
}

/// Residue of a rational mod FILTER_PRIME, or None when the prime divides
/// the denominator (so no residue exists). Going entry by entry sidesteps
/// the row-wide lcm that [`integerize_row`] would compute, which matters
/// when denominators run to hundreds of digits.
pub fn rat_mod_filter_prime(v: &Rat) -> Option<u64> {
    let den = bigint_mod_filter_prime(v.denom());
    if den == 0 {
        return None;
    }
    Some(mul_mod(bigint_mod_filter_prime(v.numer()), inv_mod(den)))
}

fn row_residues(row: &[Rat]) -> Option<Vec<u64>> {
    row.iter().map(rat_mod_filter_prime).collect()
}

/// Incremental row echelon over GF(FILTER_PRIME). An "independent" answer
/// from insert is always correct over the rationals (an integer dependency
/// would survive reduction mod p); a "dependent" answer can, with
/// probability on the order of 1/FILTER_PRIME, be spurious and needs exact
/// confirmation when exactness matters.
///
/// Pivot rows are kept in insertion order: each was fully reduced against
/// all earlier pivots when inserted, so its entries at earlier pivot columns
/// are zero and a single in-order reduction pass is complete.
pub struct ModPEchelon {
    cols: usize,
    pivots: Vec<(usize, Vec<u64>)>,
}

impl ModPEchelon {
    pub fn new(cols: usize) -> Self {
        ModPEchelon {
            cols,
            pivots: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// The pivot column of each kept row, in insertion order. The kept rows
    /// restricted to these columns form a matrix that is invertible mod p,
    /// hence invertible over the rationals.
    pub fn pivot_cols(&self) -> Vec<usize> {
        self.pivots.iter().map(|(col, _)| *col).collect()
    }

    /// Reduces the row against the pivots and keeps it if anything survives.
    /// Entries must already be residues below FILTER_PRIME.
    pub fn insert(&mut self, mut row: Vec<u64>) -> bool {
        assert_eq!(row.len(), self.cols, "row length mismatch");
        for (col, prow) in &self.pivots {
            let c = row[*col];
            if c == 0 {
                continue;
            }
            for (tv, pv) in row.iter_mut().zip(prow) {
                if *pv != 0 {
                    let sub = mul_mod(c, *pv);
                    *tv = (*tv + FILTER_PRIME - sub) % FILTER_PRIME;
                }
            }
        }
        let Some(lead) = row.iter().position(|&v| v != 0) else {
            return false;
        };
        let inv = inv_mod(row[lead]);
        for v in row.iter_mut() {
            if *v != 0 {
                *v = mul_mod(*v, inv);
            }
        }
        self.pivots.push((lead, row));
        true
    }
}

/// Rank of a matrix over GF(FILTER_PRIME). Consumes the rows.
pub fn rank_mod_filter_prime(rows: Vec<Vec<u64>>) -> usize {
    let Some(first) = rows.first() else {
        return 0;
    };
    let mut ech = ModPEchelon::new(first.len());
    for row in rows {
        ech.insert(row);
    }
    ech.rank()
}

/// Does `target` lie in the rational row space of `rows`?
///
/// Tries two one-sided modular shortcuts first. Both are sound: independence
/// mod a prime implies independence over the rationals (a gcd-reduced integer
/// dependency would survive reduction), so
///   - full column rank mod p means the row space is everything, and
///   - full row rank mod p plus an independent appended target means the
///     target genuinely sits outside.
///
/// When neither side triggers, falls back to exact integer elimination.
pub fn int_rowspace_contains(rows: &[Vec<BigInt>], target: &[BigInt]) -> bool {
    if rows.is_empty() {
        return target.iter().all(BigInt::is_zero);
    }
    let n_cols = target.len();
    let modular: Vec<Vec<u64>> = rows
        .iter()
        .map(|r| r.iter().map(bigint_mod_filter_prime).collect())
        .collect();
    let rank = rank_mod_filter_prime(modular.clone());
    if rank == n_cols {
        return true;
    }
    if rank == rows.len() {
        let mut extended = modular;
        extended.push(target.iter().map(bigint_mod_filter_prime).collect());
        if rank_mod_filter_prime(extended) == rows.len() + 1 {
            return false;
        }
    }
    let mut ech = IntEchelon::new(n_cols);
    for r in rows {
        ech.insert(r);
    }
    ech.contains(target)
}

/// Exact fallback: rational elimination with coefficient tracking decides
/// membership and produces the combination in one pass.
fn express_by_echelon(rows: &[&[Rat]], target: &[Rat]) -> Option<Vec<Rat>> {
    let mut ech = Echelon::with_tracking(target.len());
    for row in rows {
        ech.insert(row);
    }
    ech.express(target)
}

/// Solves for combinations of `basis` rows restricted to the pivot columns
/// `cols`: for each rhs row c, coefficients x with sum_k x[k] * basis[k][J] =
/// c[J]. The restricted matrix must be invertible (guaranteed here because
/// its determinant is nonzero mod FILTER_PRIME).
///
/// The system is solved transposed and with per-basis-row scaling, so every
/// integer entry carries only a single row's denominator lcm rather than the
/// product across all rows: writing t_k = basis[k][J] * d_k for the row's
/// cleared form, column k of the system holds t_k and the solve returns z
/// with x[k] = z[k] * d_k.
fn pivot_combinations(
    basis: &[&[Rat]],
    cols: &[usize],
    rhs_rows: &[&[Rat]],
) -> Result<Vec<Vec<Rat>>, LinalgError> {
    let r = basis.len();
    debug_assert_eq!(cols.len(), r);
    let mut cleared = Vec::with_capacity(r);
    for row in basis {
        let restricted: Vec<Rat> = cols.iter().map(|&j| row[j].clone()).collect();
        cleared.push(integerize_row_scaled(&restricted));
    }
    let system = RatMatrix::from_rows(
        (0..r)
            .map(|i| {
                cleared
                    .iter()
                    .map(|(t, _)| Rat::from_integer(t[i].clone()))
                    .collect()
            })
            .collect(),
    )?;
    let rhs: Vec<Vec<Rat>> = rhs_rows
        .iter()
        .map(|row| cols.iter().map(|&j| row[j].clone()).collect())
        .collect();
    let solutions = solve_square_multi(&system, &rhs)?;
    Ok(solutions
        .into_iter()
        .map(|z| {
            z.into_iter()
                .zip(&cleared)
                .map(|(zk, (_, dk))| zk * Rat::from_integer(dk.clone()))
                .collect()
        })
        .collect())
}

/// Does the combination reproduce `target` on the non-pivot columns? The
/// pivot columns hold by construction of the solve, so only the rest need
/// checking.
fn combination_matches(
    basis: &[&[Rat]],
    coeffs: &[Rat],
    target: &[Rat],
    pivot_mask: &[bool],
) -> bool {
    for (j, is_pivot) in pivot_mask.iter().enumerate() {
        if *is_pivot {
            continue;
        }
        let mut acc = Rat::zero();
        for (row, c) in basis.iter().zip(coeffs) {
            if !c.is_zero() && !row[j].is_zero() {
                acc += c * &row[j];
            }
        }
        if acc != target[j] {
            return false;
        }
    }
    true
}

/// Spreads coefficients over the kept rows back out to one slot per input
/// row, zero elsewhere.
fn scatter(combo: Vec<Rat>, kept: &[usize], total: usize) -> Vec<Rat> {
    let mut full = vec![Rat::zero(); total];
    for (c, &i) in combo.into_iter().zip(kept) {
        full[i] = c;
    }
    full
}

/// If `target` lies in the rational row space of `rows`, returns coefficients
/// expressing it (one per row); otherwise None. Exact in both directions.
///
/// The cheap path works mod FILTER_PRIME on residues taken entry by entry,
/// never clearing whole-row denominators. Elimination over GF(p) picks out a
/// subset of rows that is independent over the rationals (a dependency would
/// survive reduction mod p) together with their pivot columns J; the kept
/// rows restricted to J are invertible over the rationals since their
/// determinant is nonzero mod p. A single fraction-free solve on that
/// restriction then yields, for any row in the span of the kept rows, the
/// unique candidate combination agreeing on J.
///
/// Dropped rows and the target only *look* dependent mod p, so each solved
/// combination is verified on the remaining columns. Once every dropped row
/// verifies, the kept rows span the full row space and the target's verdict
/// is conclusive either way. Any verification failure (a mod-p accident, of
/// order 1/2^61) or a denominator the prime divides falls back to exact
/// rational elimination.
pub fn rat_rowspace_express(rows: &[&[Rat]], target: &[Rat]) -> Option<Vec<Rat>> {
    if rows.is_empty() {
        return target.iter().all(Rat::is_zero).then(Vec::new);
    }
    let n_cols = target.len();
    let mut ech = ModPEchelon::new(n_cols);
    let mut kept = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let Some(res) = row_residues(row) else {
            return express_by_echelon(rows, target);
        };
        if ech.insert(res) {
            kept.push(i);
        }
    }
    let Some(target_res) = row_residues(target) else {
        return express_by_echelon(rows, target);
    };
    let pivot_cols = ech.pivot_cols();
    let target_outside_mod_p = ech.insert(target_res);
    let dropped: Vec<usize> = (0..rows.len())
        .filter(|i| kept.binary_search(i).is_err())
        .collect();

    if target_outside_mod_p && dropped.is_empty() {
        return None;
    }
    let basis: Vec<&[Rat]> = kept.iter().map(|&i| rows[i]).collect();
    if !target_outside_mod_p && kept.len() == n_cols {
        // Full column rank: the restriction is the whole matrix, so the
        // solved combination needs no further checking.
        return match pivot_combinations(&basis, &pivot_cols, &[target]) {
            Ok(mut combos) => Some(scatter(combos.pop().unwrap(), &kept, rows.len())),
            Err(_) => express_by_echelon(rows, target),
        };
    }

    let mut rhs: Vec<&[Rat]> = Vec::with_capacity(dropped.len() + 1);
    if !target_outside_mod_p {
        rhs.push(target);
    }
    rhs.extend(dropped.iter().map(|&i| rows[i]));
    let Ok(combos) = pivot_combinations(&basis, &pivot_cols, &rhs) else {
        return express_by_echelon(rows, target);
    };
    let mut pivot_mask = vec![false; n_cols];
    for &j in &pivot_cols {
        pivot_mask[j] = true;
    }
    let dropped_combos = &combos[if target_outside_mod_p { 0 } else { 1 }..];
    for (&i, combo) in dropped.iter().zip(dropped_combos) {
        if !combination_matches(&basis, combo, rows[i], &pivot_mask) {
            return express_by_echelon(rows, target);
        }
    }
    if target_outside_mod_p {
        return None;
    }
    combination_matches(&basis, &combos[0], target, &pivot_mask)
        .then(|| scatter(combos[0].clone(), &kept, rows.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat, rat_int};

    fn rows_i64(rows: &[&[i64]]) -> Vec<Vec<Rat>> {
        rows.iter()
            .map(|r| r.iter().map(|&v| rat_int(v)).collect())
            .collect()
    }

    #[test]
    fn matrix_mul_identity() {
        let a = RatMatrix::from_rows(rows_i64(&[&[1, 2], &[3, 4], &[5, 6]])).unwrap();
        let id = RatMatrix::identity(2);
        assert_eq!(a.mul(&id).unwrap(), a);
        let bad = a.mul(&a);
        assert!(matches!(bad, Err(LinalgError::DimensionMismatch { .. })));
    }

    #[test]
    fn transpose_involution() {
        let a = RatMatrix::from_rows(rows_i64(&[&[1, 0, 2], &[0, 3, 0]])).unwrap();
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn echelon_rank_and_membership() {
        let mut e = Echelon::new(3);
        assert!(e.insert(&rows_i64(&[&[1, 1, 0]])[0]));
        assert!(e.insert(&rows_i64(&[&[0, 1, 1]])[0]));
        assert!(!e.insert(&rows_i64(&[&[1, 2, 1]])[0]));
        assert_eq!(e.rank(), 2);
        assert!(e.contains(&rows_i64(&[&[2, 3, 1]])[0]));
        assert!(!e.contains(&rows_i64(&[&[1, 0, 1]])[0]));
    }

    #[test]
    fn echelon_express_certificate() {
        let rows = rows_i64(&[&[1, 1, 0], &[0, 1, 1], &[1, 2, 1]]);
        let mut e = Echelon::with_tracking(3);
        for r in &rows {
            e.insert(r);
        }
        let target = vec![rat_int(3), rat_int(5), rat_int(2)];
        let combo = e.express(&target).expect("in span");
        assert_eq!(combo.len(), 3);
        let mut rebuilt = vec![Rat::zero(); 3];
        for (c, row) in combo.iter().zip(&rows) {
            for (acc, v) in rebuilt.iter_mut().zip(row) {
                *acc += c * v;
            }
        }
        assert_eq!(rebuilt, target);
        assert!(e.express(&rows_i64(&[&[0, 7, 7]])[0].clone()).is_some());
        assert!(e.express(&rows_i64(&[&[1, 0, 1]])[0].clone()).is_none());
    }

    #[test]
    fn echelon_certificate_with_rational_rows() {
        let rows = vec![
            vec![rat(1, 2), rat(1, 2), rat_int(0)],
            vec![rat(1, 3), rat(1, 3), rat(1, 3)],
        ];
        let mut e = Echelon::with_tracking(3);
        for r in &rows {
            e.insert(r);
        }
        let target = vec![rat_int(0), rat_int(0), rat_int(1)];
        let combo = e.express(&target).expect("in span");
        let mut rebuilt = vec![Rat::zero(); 3];
        for (c, row) in combo.iter().zip(&rows) {
            for (acc, v) in rebuilt.iter_mut().zip(row) {
                *acc += c * v;
            }
        }
        assert_eq!(rebuilt, target);
    }

    #[test]
    fn solve_square_exact() {
        let a = RatMatrix::from_rows(rows_i64(&[&[2, 1], &[1, 3]])).unwrap();
        let b = vec![rat_int(5), rat_int(10)];
        let x = solve_square(&a, &b).unwrap();
        assert_eq!(x, vec![rat_int(1), rat_int(3)]);

        let singular = RatMatrix::from_rows(rows_i64(&[&[1, 2], &[2, 4]])).unwrap();
        assert!(matches!(
            solve_square(&singular, &b),
            Err(LinalgError::Singular)
        ));
    }

    #[test]
    fn solve_square_needs_row_swap() {
        let a = RatMatrix::from_rows(rows_i64(&[&[0, 1], &[1, 0]])).unwrap();
        let b = vec![rat_int(7), rat_int(9)];
        let x = solve_square(&a, &b).unwrap();
        assert_eq!(x, vec![rat_int(9), rat_int(7)]);
    }

    #[test]
    fn solve_square_multi_matches_single() {
        let a = RatMatrix::from_rows(vec![
            vec![rat(1, 2), rat_int(3), rat_int(-1)],
            vec![rat_int(0), rat(2, 7), rat_int(5)],
            vec![rat_int(4), rat(-1, 3), rat_int(1)],
        ])
        .unwrap();
        let bs = vec![
            vec![rat_int(1), rat_int(0), rat_int(0)],
            vec![rat(3, 5), rat(-2, 9), rat_int(11)],
            vec![rat_int(0), rat_int(0), rat_int(0)],
        ];
        let all = solve_square_multi(&a, &bs).unwrap();
        for (b, x) in bs.iter().zip(&all) {
            assert_eq!(x, &solve_square(&a, b).unwrap());
        }
        assert!(all[2].iter().all(Rat::is_zero));
    }

    fn big_rows(rows: &[&[i64]]) -> Vec<Vec<BigInt>> {
        rows.iter()
            .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
            .collect()
    }

    #[test]
    fn int_echelon_matches_rational_rank() {
        let rows = big_rows(&[&[2, 4, 0], &[1, 2, 0], &[0, 0, 3], &[1, 2, 3]]);
        let mut e = IntEchelon::new(3);
        let independent: Vec<bool> = rows.iter().map(|r| e.insert(r)).collect();
        assert_eq!(independent, vec![true, false, true, false]);
        assert_eq!(e.rank(), 2);
        assert!(e.contains(&big_rows(&[&[3, 6, -3]])[0]));
        assert!(!e.contains(&big_rows(&[&[1, 0, 0]])[0]));
    }

    #[test]
    fn modular_rank_matches() {
        let rows: Vec<Vec<u64>> = vec![
            vec![1, 1, 0, 0],
            vec![0, 1, 1, 0],
            vec![1, 0, 1, 0],
            vec![1, 2, 1, 0], // dependent on the first two
        ];
        assert_eq!(rank_mod_filter_prime(rows), 3);
    }

    #[test]
    fn rowspace_membership_shortcuts_and_fallback() {
        // Full column rank: everything is a member.
        let rows = big_rows(&[&[1, 0], &[1, 1]]);
        assert!(int_rowspace_contains(&rows, &big_rows(&[&[17, -4]])[0]));
        // Full row rank, independent target: proven outside.
        let rows = big_rows(&[&[1, 1, 0]]);
        assert!(!int_rowspace_contains(&rows, &big_rows(&[&[0, 0, 1]])[0]));
        // Dependent rows force the exact fallback.
        let rows = big_rows(&[&[1, 1, 0], &[2, 2, 0], &[0, 0, 5]]);
        assert!(int_rowspace_contains(&rows, &big_rows(&[&[3, 3, 1]])[0]));
        assert!(!int_rowspace_contains(&rows, &big_rows(&[&[1, 0, 0]])[0]));
        // Empty row set spans only zero.
        assert!(int_rowspace_contains(&[], &big_rows(&[&[0, 0]])[0]));
        assert!(!int_rowspace_contains(&[], &big_rows(&[&[1, 0]])[0]));
    }

    fn check_express(rows: &[Vec<Rat>], target: &[Rat]) {
        let refs: Vec<&[Rat]> = rows.iter().map(Vec::as_slice).collect();
        let got = rat_rowspace_express(&refs, target);
        let want = express_by_echelon(&refs, target);
        assert_eq!(got.is_some(), want.is_some());
        if let Some(combo) = got {
            let mut rebuilt = vec![Rat::zero(); target.len()];
            for (c, row) in combo.iter().zip(rows) {
                for (acc, v) in rebuilt.iter_mut().zip(row) {
                    *acc += c * v;
                }
            }
            assert_eq!(rebuilt, target);
        }
    }

    #[test]
    fn rowspace_express_handles_each_branch() {
        // Empty basis spans only zero.
        assert_eq!(
            rat_rowspace_express(&[], &[rat_int(0), rat_int(0)]),
            Some(vec![])
        );
        assert_eq!(rat_rowspace_express(&[], &[rat_int(1)]), None);
        // Independent rows, target outside: settled without any solve.
        check_express(&rows_i64(&[&[1, 1, 0]]), &rows_i64(&[&[0, 0, 1]])[0]);
        // Full column rank: every target is expressible.
        check_express(
            &[
                vec![rat(1, 2), rat(1, 3)],
                vec![rat(5, 7), rat_int(-2)],
                vec![rat_int(1), rat_int(1)],
            ],
            &[rat(22, 3), rat(-4, 11)],
        );
        // Dependent rows, target in span: dropped rows verified, coefficients
        // land on the kept rows.
        check_express(
            &rows_i64(&[&[1, 1, 0], &[2, 2, 0], &[0, 0, 5]]),
            &rows_i64(&[&[3, 3, 1]])[0],
        );
        // Dependent rows, target outside.
        check_express(
            &rows_i64(&[&[1, 1, 0], &[2, 2, 0]]),
            &rows_i64(&[&[1, 0, 0]])[0],
        );
    }

    #[test]
    fn rowspace_express_agrees_with_echelon_on_random_input() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..60 {
            let n_rows = rng.gen_range(1..=5);
            let n_cols = rng.gen_range(1..=4);
            let rows: Vec<Vec<Rat>> = (0..n_rows)
                .map(|_| {
                    (0..n_cols)
                        .map(|_| rat(rng.gen_range(-3..=3), rng.gen_range(1..=3)))
                        .collect()
                })
                .collect();
            // A random combination of the rows is in the span by construction;
            // an arbitrary vector usually is not.
            let mut combined = vec![Rat::zero(); n_cols];
            for row in &rows {
                let c = rat(rng.gen_range(-2..=2), 1);
                for (acc, v) in combined.iter_mut().zip(row) {
                    *acc += &c * v;
                }
            }
            check_express(&rows, &combined);
            let arbitrary: Vec<Rat> = (0..n_cols)
                .map(|_| rat(rng.gen_range(-4..=4), rng.gen_range(1..=2)))
                .collect();
            check_express(&rows, &arbitrary);
        }
    }

    #[test]
    fn dot_helpers() {
        let a = rows_i64(&[&[1, 2, 3]])[0].clone();
        let b = rows_i64(&[&[4, 0, 1]])[0].clone();
        assert_eq!(dot(&a, &b), rat_int(7));
        let scale = vec![rat(1, 2), rat_int(1), rat_int(2)];
        assert_eq!(dot_scaled(&a, &b, &scale), rat_int(8));
    }
}
