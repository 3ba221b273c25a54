//! Vector-space secret sharing over Z_{2^l}.
//!
//! A secret `x` is embedded as `(x, s1, s2)` and share `i` is the dot product
//! with row `i` of a public 4x3 matrix. Rows 0..=2 are the ordinary shares of
//! P0, P1 and P2. Row 3 is an alternate share kept by P0, so P0 and P1 can
//! still reconstruct after P2 leaves.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::ring::Ring;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Restriction {
    /// Rows 0..=2 form an invertible matrix and reconstruct with nonzero coefficients.
    Invertible,
    /// Row 3 is a combination of rows 1 and 2 with nonzero weights, and both
    /// two-party reconstruction sets are solvable.
    AlternateRow,
    /// Neither {0,3} nor {1,2,3} reaches the secret.
    Unauthorized,
    /// Every entry lies in the ring.
    RingEntries,
    /// The index-0 reconstruction coefficients are odd, as truncation divides by them.
    OddDivisor,
    /// The matrix is not 4x3.
    Shape,
}

impl Restriction {
    pub fn number(self) -> u8 {
        match self {
            Restriction::Invertible => 1,
            Restriction::AlternateRow => 2,
            Restriction::Unauthorized => 3,
            Restriction::RingEntries => 4,
            Restriction::OddDivisor => 5,
            Restriction::Shape => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub restriction: Restriction,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.restriction {
            Restriction::Shape => write!(f, "unsupported shape: {}", self.detail),
            r => write!(f, "restriction {} ({:?}): {}", r.number(), r, self.detail),
        }
    }
}

fn violation(restriction: Restriction, detail: impl Into<String>) -> Violation {
    Violation { restriction, detail: detail.into() }
}

/// Solves `A x = b` over Z_{2^l}. Returns one solution when any exists.
///
/// Elimination uses full pivoting on the entry of least 2-adic valuation, so
/// every pivot divides every entry below and to the right of it. The reduced
/// system is then upper triangular with pivots dividing their rows, and it is
/// solvable exactly when each back-substitution step divides.
pub fn solve_mod(ring: Ring, a: &[Vec<u64>], b: &[u64]) -> Option<Vec<u64>> {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut m: Vec<Vec<u64>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r: Vec<u64> = row.iter().map(|v| ring.reduce(*v)).collect();
            r.push(ring.reduce(*rhs));
            r
        })
        .collect();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut rank = 0;
    while rank < rows.min(cols) {
        let mut best: Option<(u32, usize, usize)> = None;
        for (i, row) in m.iter().enumerate().skip(rank) {
            for (j, v) in row.iter().enumerate().take(cols).skip(rank) {
                let val = ring.valuation(*v);
                if val < ring.bits() && best.map_or(true, |(bv, _, _)| val < bv) {
                    best = Some((val, i, j));
                }
            }
        }
        let Some((v, pi, pj)) = best else { break };
        m.swap(rank, pi);
        for row in m.iter_mut() {
            row.swap(rank, pj);
        }
        perm.swap(rank, pj);
        let unit_inv = ring.odd_inverse(m[rank][rank] >> v).expect("odd by construction");
        for i in rank + 1..rows {
            if m[i][rank] == 0 {
                continue;
            }
            let f = ring.mul(m[i][rank] >> v, unit_inv);
            for j in rank..=cols {
                let t = ring.mul(f, m[rank][j]);
                m[i][j] = ring.sub(m[i][j], t);
            }
        }
        rank += 1;
    }
    if m.iter().skip(rank).any(|row| row[cols] != 0) {
        return None;
    }
    let mut x = vec![0u64; cols];
    for r in (0..rank).rev() {
        let mut rhs = m[r][cols];
        for j in r + 1..cols {
            rhs = ring.sub(rhs, ring.mul(m[r][j], x[j]));
        }
        let v = ring.valuation(m[r][r]);
        if ring.valuation(rhs) < v {
            return None;
        }
        let unit_inv = ring.odd_inverse(m[r][r] >> v).expect("odd by construction");
        x[r] = ring.mul(rhs >> v, unit_inv);
    }
    let mut out = vec![0u64; cols];
    for (k, &p) in perm.iter().enumerate() {
        out[p] = x[k];
    }
    debug_assert!(a.iter().zip(b).all(|(row, rhs)| ring.dot(row, &out) == ring.reduce(*rhs)));
    Some(out)
}

pub fn det3(ring: Ring, m: [[u64; 3]; 3]) -> u64 {
    let t = |a: u64, b: u64, c: u64, d: u64| ring.sub(ring.mul(a, b), ring.mul(c, d));
    let a = ring.mul(m[0][0], t(m[1][1], m[2][2], m[1][2], m[2][1]));
    let b = ring.mul(m[0][1], t(m[1][0], m[2][2], m[1][2], m[2][0]));
    let c = ring.mul(m[0][2], t(m[1][0], m[2][1], m[1][1], m[2][0]));
    ring.add(ring.sub(a, b), c)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicMatrix {
    ring: Ring,
    rows: [[u64; 3]; 4],
}

impl PublicMatrix {
    /// Builds a matrix from arbitrary rows. Shape and range are checked by
    /// [`validate_matrix`], not here.
    pub fn from_rows(ring: Ring, rows: &[Vec<u64>]) -> Result<Self> {
        if rows.len() != 4 || rows.iter().any(|r| r.len() != 3) {
            let shape = format!(
                "{}x{}",
                rows.len(),
                rows.first().map_or(0, |r| r.len())
            );
            return Err(Error::Validation(vec![violation(Restriction::Shape, shape)]));
        }
        let mut out = [[0u64; 3]; 4];
        for (o, r) in out.iter_mut().zip(rows) {
            o.copy_from_slice(r);
        }
        Ok(PublicMatrix { ring, rows: out })
    }

    pub fn new(ring: Ring, rows: [[u64; 3]; 4]) -> Self {
        PublicMatrix { ring, rows }
    }

    /// The default matrix: rows (1,0,1), (1,1,-1), (2,2,-3), (3,3,-4).
    pub fn standard(ring: Ring) -> Self {
        let n = |v: i64| ring.from_i64(v);
        PublicMatrix {
            ring,
            rows: [[1, 0, 1], [1, 1, n(-1)], [2, 2, n(-3)], [3, 3, n(-4)]],
        }
    }

    pub fn ring(&self) -> Ring {
        self.ring
    }

    pub fn rows(&self) -> &[[u64; 3]; 4] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> [u64; 3] {
        self.rows[i]
    }
}

/// Reconstruction and dependency coefficients derived from a public matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoefficientBundle {
    /// Weights on shares 0, 1, 2.
    pub c: [u64; 3],
    /// Weights on shares 0, 1, 3.
    pub c_prime: [u64; 3],
    /// Weights on shares 0, 2, 3.
    pub c_dprime: [u64; 3],
    /// Row 3 = a1 * row 1 + a2 * row 2.
    pub a1: u64,
    pub a2: u64,
}

impl CoefficientBundle {
    pub fn to_array(&self) -> [u64; 11] {
        let c = &self.c;
        let p = &self.c_prime;
        let d = &self.c_dprime;
        [c[0], c[1], c[2], p[0], p[1], p[2], d[0], d[1], d[2], self.a1, self.a2]
    }

    pub fn from_array(v: [u64; 11]) -> Self {
        CoefficientBundle {
            c: [v[0], v[1], v[2]],
            c_prime: [v[3], v[4], v[5]],
            c_dprime: [v[6], v[7], v[8]],
            a1: v[9],
            a2: v[10],
        }
    }
}

fn solve_rows(ring: Ring, rows: &[[u64; 3]]) -> Option<Vec<u64>> {
    // Unknowns are the row weights; equations are the three coordinates.
    let a: Vec<Vec<u64>> = (0..3).map(|k| rows.iter().map(|r| r[k]).collect()).collect();
    solve_mod(ring, &a, &[1, 0, 0])
}

/// Checks every restriction and derives the coefficients. All violations are
/// reported together.
pub fn validate_matrix(pm: &PublicMatrix) -> Result<CoefficientBundle> {
    let ring = pm.ring;
    let r = &pm.rows;
    let mut bad = Vec::new();

    for (i, row) in r.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if *v > ring.mask() {
                bad.push(violation(
                    Restriction::RingEntries,
                    format!("entry ({i},{j}) = {v} is not below 2^{}", ring.bits()),
                ));
            }
        }
    }
    if !bad.is_empty() {
        return Err(Error::Validation(bad));
    }

    let det = det3(ring, [r[0], r[1], r[2]]);
    let mut c = [0u64; 3];
    if det & 1 == 0 {
        bad.push(violation(
            Restriction::Invertible,
            format!("determinant of rows 0..=2 is {det}, which is even"),
        ));
    } else {
        let sol = solve_rows(ring, &[r[0], r[1], r[2]]).expect("odd determinant is invertible");
        c.copy_from_slice(&sol);
        if c.iter().any(|v| *v == 0) {
            bad.push(violation(
                Restriction::Invertible,
                format!("reconstruction coefficients {c:?} include zero"),
            ));
        }
    }

    let mut a = [0u64; 2];
    let dep: Vec<Vec<u64>> = (0..3).map(|k| vec![r[1][k], r[2][k]]).collect();
    match solve_mod(ring, &dep, &r[3]) {
        Some(sol) if sol.iter().all(|v| *v != 0) => a.copy_from_slice(&sol),
        Some(sol) => bad.push(violation(
            Restriction::AlternateRow,
            format!("row 3 depends on rows 1, 2 with a zero weight {sol:?}"),
        )),
        None => bad.push(violation(
            Restriction::AlternateRow,
            "row 3 is not a combination of rows 1 and 2",
        )),
    }

    let mut cp = [0u64; 3];
    match solve_rows(ring, &[r[0], r[1], r[3]]) {
        Some(sol) => cp.copy_from_slice(&sol),
        None => bad.push(violation(
            Restriction::AlternateRow,
            "shares {0,1,3} cannot reconstruct",
        )),
    }
    let mut cpp = [0u64; 3];
    match solve_rows(ring, &[r[0], r[2], r[3]]) {
        Some(sol) => cpp.copy_from_slice(&sol),
        None => bad.push(violation(
            Restriction::AlternateRow,
            "shares {0,2,3} cannot reconstruct",
        )),
    }

    if solve_rows(ring, &[r[0], r[3]]).is_some() {
        bad.push(violation(Restriction::Unauthorized, "shares {0,3} reconstruct the secret"));
    }
    if solve_rows(ring, &[r[1], r[2], r[3]]).is_some() {
        bad.push(violation(Restriction::Unauthorized, "shares {1,2,3} reconstruct the secret"));
    }

    if det & 1 == 1 && c[0] & 1 == 0 {
        bad.push(violation(Restriction::OddDivisor, format!("c0 = {} is even", c[0])));
    }
    if cp[0] & 1 == 0 && !bad.iter().any(|v| v.detail.contains("{0,1,3}")) {
        bad.push(violation(Restriction::OddDivisor, format!("c'0 = {} is even", cp[0])));
    }

    if bad.is_empty() {
        Ok(CoefficientBundle { c, c_prime: cp, c_dprime: cpp, a1: a[0], a2: a[1] })
    } else {
        Err(Error::Validation(bad))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VShare {
    pub index: u8,
    pub value: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixShare {
    pub index: u8,
    pub values: Matrix,
}

/// A validated sharing scheme.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vsss {
    pm: PublicMatrix,
    coeffs: CoefficientBundle,
}

impl Vsss {
    pub fn new(pm: PublicMatrix) -> Result<Self> {
        let coeffs = validate_matrix(&pm)?;
        Ok(Vsss { pm, coeffs })
    }

    pub fn standard(ring: Ring) -> Result<Self> {
        Vsss::new(PublicMatrix::standard(ring))
    }

    pub fn ring(&self) -> Ring {
        self.pm.ring
    }

    pub fn matrix(&self) -> &PublicMatrix {
        &self.pm
    }

    pub fn coeffs(&self) -> &CoefficientBundle {
        &self.coeffs
    }

    /// Share values for `(x, s1, s2)` at all four indices.
    #[inline]
    pub fn share_values(&self, x: u64, s1: u64, s2: u64) -> [u64; 4] {
        let ring = self.pm.ring;
        let v = [x, s1, s2];
        let r = &self.pm.rows;
        [ring.dot(&r[0], &v), ring.dot(&r[1], &v), ring.dot(&r[2], &v), ring.dot(&r[3], &v)]
    }

    pub fn share_with(&self, x: u64, s1: u64, s2: u64) -> [VShare; 4] {
        let v = self.share_values(self.ring().reduce(x), s1, s2);
        [0u8, 1, 2, 3].map(|i| VShare { index: i, value: v[i as usize] })
    }

    pub fn share<R: Rng + ?Sized>(&self, x: u64, rng: &mut R) -> [VShare; 4] {
        let ring = self.ring();
        let s1 = ring.random(rng);
        let s2 = ring.random(rng);
        self.share_with(x, s1, s2)
    }

    /// Shares every entry of `x` with fresh randomness. Returns the four share matrices.
    pub fn share_matrix<R: Rng + ?Sized>(&self, x: &Matrix, rng: &mut R) -> [Matrix; 4] {
        let ring = self.ring();
        let mut out: [Vec<u64>; 4] = Default::default();
        for o in out.iter_mut() {
            o.reserve(x.len());
        }
        for &v in x.data() {
            let s1 = ring.random(rng);
            let s2 = ring.random(rng);
            let sh = self.share_values(v, s1, s2);
            for k in 0..4 {
                out[k].push(sh[k]);
            }
        }
        let (r, c) = x.shape();
        out.map(|d| Matrix::from_vec(r, c, d).expect("shape preserved"))
    }

    /// Weights for the reconstruction set `indices` (sorted), in index order.
    pub fn weights_for(&self, indices: [u8; 3]) -> Result<[u64; 3]> {
        match indices {
            [0, 1, 2] => Ok(self.coeffs.c),
            [0, 1, 3] => Ok(self.coeffs.c_prime),
            [0, 2, 3] => Ok(self.coeffs.c_dprime),
            other => Err(Error::Argument(format!("share set {other:?} is not authorized"))),
        }
    }

    pub fn reconstruct(&self, shares: &[VShare]) -> Result<u64> {
        if shares.len() != 3 {
            return Err(Error::Argument(format!(
                "reconstruction needs 3 shares, got {}",
                shares.len()
            )));
        }
        let mut s = shares.to_vec();
        s.sort_by_key(|v| v.index);
        let w = self.weights_for([s[0].index, s[1].index, s[2].index])?;
        let ring = self.ring();
        Ok(ring.dot(&w, &[s[0].value, s[1].value, s[2].value]))
    }

    pub fn reconstruct_matrix(&self, shares: &[MatrixShare]) -> Result<Matrix> {
        if shares.len() != 3 {
            return Err(Error::Argument("reconstruction needs 3 shares".into()));
        }
        let mut s: Vec<&MatrixShare> = shares.iter().collect();
        s.sort_by_key(|v| v.index);
        let w = self.weights_for([s[0].index, s[1].index, s[2].index])?;
        self.combine(&w, [&s[0].values, &s[1].values, &s[2].values])
    }

    /// `w0*a + w1*b + w2*c` entrywise.
    pub fn combine(&self, w: &[u64; 3], m: [&Matrix; 3]) -> Result<Matrix> {
        let ring = self.ring();
        if m[1].shape() != m[0].shape() || m[2].shape() != m[0].shape() {
            return Err(Error::Shape("reconstruction from mismatched shares".into()));
        }
        let data = m[0]
            .data()
            .iter()
            .zip(m[1].data())
            .zip(m[2].data())
            .map(|((a, b), c)| ring.dot(w, &[*a, *b, *c]))
            .collect();
        Matrix::from_vec(m[0].rows(), m[0].cols(), data)
    }

    /// `k1*a + k2*b` for two shares at the same index.
    pub fn lincomb(&self, k1: u64, a: VShare, k2: u64, b: VShare) -> Result<VShare> {
        if a.index != b.index {
            return Err(Error::Argument(format!(
                "combining shares at indices {} and {}",
                a.index, b.index
            )));
        }
        let ring = self.ring();
        Ok(VShare { index: a.index, value: ring.add(ring.mul(k1, a.value), ring.mul(k2, b.value)) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_coefficients() {
        let ring = Ring::new(64).unwrap();
        let c = validate_matrix(&PublicMatrix::standard(ring)).unwrap();
        let n = |v: i64| ring.from_i64(v);
        assert_eq!(c.c, [1, n(-2), 1]);
        assert_eq!(c.c_prime, [1, n(-3), 1]);
        assert_eq!(c.c_dprime, [1, 3, n(-2)]);
        assert_eq!((c.a1, c.a2), (1, 1));
    }

    #[test]
    fn share_examples() {
        let v = Vsss::standard(Ring::new(64).unwrap()).unwrap();
        assert_eq!(v.share_with(5, 0, 0).map(|x| x.value), [5, 5, 10, 15]);
        let s = v.share_with(5, 1, 2);
        assert_eq!(s.map(|x| x.value), [7, 4, 6, 10]);
        assert_eq!(v.reconstruct(&[s[0], s[1], s[2]]).unwrap(), 5);
        assert_eq!(v.reconstruct(&[s[3], s[1], s[0]]).unwrap(), 5);
        assert_eq!(v.reconstruct(&[s[0], s[2], s[3]]).unwrap(), 5);
        assert!(v.reconstruct(&[s[1], s[2], s[3]]).is_err());
        assert_eq!(v.share_with(0, 0, 0).map(|x| x.value), [0; 4]);
    }

    #[test]
    fn alternate_row_equal_to_row_zero_is_rejected() {
        let ring = Ring::new(64).unwrap();
        let n = |v: i64| ring.from_i64(v);
        let pm = PublicMatrix::new(ring, [[1, 0, 1], [1, 1, n(-1)], [2, 2, n(-3)], [1, 0, 1]]);
        let Err(Error::Validation(v)) = validate_matrix(&pm) else { panic!("accepted") };
        assert!(v.iter().any(|x| x.restriction == Restriction::AlternateRow));
    }

    #[test]
    fn dependent_rows_are_rejected() {
        let ring = Ring::new(64).unwrap();
        let pm = PublicMatrix::new(ring, [[1, 0, 1], [1, 1, 2], [2, 1, 3], [3, 2, 5]]);
        let Err(Error::Validation(v)) = validate_matrix(&pm) else { panic!("accepted") };
        assert!(v.iter().any(|x| x.restriction == Restriction::Invertible));
    }

    #[test]
    fn non_4x3_is_unsupported() {
        let ring = Ring::new(64).unwrap();
        let err = PublicMatrix::from_rows(ring, &[vec![1, 0, 1], vec![1, 1, 1]]).unwrap_err();
        assert!(err.to_string().contains("unsupported shape"));
    }

    #[test]
    fn solver_handles_even_pivots() {
        let ring = Ring::new(8).unwrap();
        // 2x = 6 has solutions, 2x = 3 has none.
        assert!(solve_mod(ring, &[vec![2]], &[6]).is_some());
        assert!(solve_mod(ring, &[vec![2]], &[3]).is_none());
        // 4x + 2y = 2, 2x + 2y = 0
        let s = solve_mod(ring, &[vec![4, 2], vec![2, 2]], &[2, 0]).unwrap();
        assert_eq!(ring.add(ring.mul(4, s[0]), ring.mul(2, s[1])), 2);
        assert_eq!(ring.add(ring.mul(2, s[0]), ring.mul(2, s[1])), 0);
    }
}
