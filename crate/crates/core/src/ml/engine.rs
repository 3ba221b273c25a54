//! The operations training needs, over three backends: the secret-shared
//! [`Party`], the cleartext [`PlainEngine`] oracle, and the [`Planner`]
//! that only counts preprocessing.

use std::collections::VecDeque;

use log::info;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::offline::{Flavor, Plan};
use crate::params::Params;
use crate::protocol::{CountingBits, Party};
use crate::ring::Ring;
use crate::share::{LocalShare, Mode, PartyId};

pub trait Engine {
    type V: Clone;

    fn params(&self) -> &Params;

    /// Brings `owner`'s private matrix into the computation. `value` is only
    /// read by the owner.
    fn input(&mut self, owner: PartyId, value: Option<&Matrix>, shape: (usize, usize)) -> Result<Self::V>;

    fn matmul(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn trunc(&mut self, z: &Self::V) -> Result<Self::V>;
    /// `(relu(x), [x >= 0])` with the bits unscaled.
    fn relu(&mut self, x: &Self::V) -> Result<(Self::V, Self::V)>;
    fn sigmoid(&mut self, x: &Self::V) -> Result<Self::V>;

    fn add(&self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn sub(&self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn scale(&self, a: &Self::V, k: u64) -> Self::V;
    fn transpose(&self, a: &Self::V) -> Self::V;
    fn select_rows(&self, a: &Self::V, rows: &[usize]) -> Self::V;
    fn vstack(&self, parts: &[&Self::V]) -> Result<Self::V>;

    /// The value in the clear at P0, `None` elsewhere.
    fn reveal(&mut self, a: &Self::V) -> Result<Option<Matrix>>;

    /// Called before iteration `t`. `drop_here` asks P2 to leave now.
    /// Returns false when this participant takes no further part.
    fn begin_iteration(&mut self, t: usize, drop_here: bool) -> Result<bool> {
        let _ = (t, drop_here);
        Ok(true)
    }
}

impl Engine for Party {
    type V = LocalShare;

    fn params(&self) -> &Params {
        Party::params(self)
    }

    fn input(&mut self, owner: PartyId, value: Option<&Matrix>, shape: (usize, usize)) -> Result<LocalShare> {
        let v = if owner == self.id() { value } else { None };
        self.share_input(owner, v, shape)
    }

    fn matmul(&mut self, a: &LocalShare, b: &LocalShare) -> Result<LocalShare> {
        Party::matmul(self, a, b)
    }

    fn mul(&mut self, a: &LocalShare, b: &LocalShare) -> Result<LocalShare> {
        Party::mul(self, a, b)
    }

    fn trunc(&mut self, z: &LocalShare) -> Result<LocalShare> {
        Party::trunc(self, z)
    }

    fn relu(&mut self, x: &LocalShare) -> Result<(LocalShare, LocalShare)> {
        Party::relu(self, x)
    }

    fn sigmoid(&mut self, x: &LocalShare) -> Result<LocalShare> {
        Party::sigmoid(self, x)
    }

    fn add(&self, a: &LocalShare, b: &LocalShare) -> Result<LocalShare> {
        a.add(b, self.params().ring())
    }

    fn sub(&self, a: &LocalShare, b: &LocalShare) -> Result<LocalShare> {
        a.sub(b, self.params().ring())
    }

    fn scale(&self, a: &LocalShare, k: u64) -> LocalShare {
        Party::scale(self, a, k)
    }

    fn transpose(&self, a: &LocalShare) -> LocalShare {
        a.transpose()
    }

    fn select_rows(&self, a: &LocalShare, rows: &[usize]) -> LocalShare {
        a.select_rows(rows)
    }

    fn vstack(&self, parts: &[&LocalShare]) -> Result<LocalShare> {
        LocalShare::vstack(parts)
    }

    fn reveal(&mut self, a: &LocalShare) -> Result<Option<Matrix>> {
        self.reveal_to_p0(a)
    }

    fn begin_iteration(&mut self, t: usize, drop_here: bool) -> Result<bool> {
        if self.mode() == Mode::TwoPartyAfterDrop {
            return Ok(self.id() != PartyId::P2);
        }
        if drop_here {
            info!("{}: P2 leaves before iteration {t}", self.id());
            self.raise_drop()?;
            return Ok(self.id() != PartyId::P2);
        }
        if self.network().watches_drop() && self.agree_on_p2_loss()? {
            info!("{}: P2 connection lost before iteration {t}", self.id());
            self.raise_drop()?;
        }
        Ok(true)
    }
}

/// Cleartext fixed-point evaluation with the same rounding as the shared
/// protocols. Given the run's truncation masks, truncation reproduces the
/// shared result exactly; without them it floors.
pub struct PlainEngine {
    params: Params,
    masks: Option<VecDeque<u64>>,
}

impl PlainEngine {
    pub fn new(params: Params) -> Self {
        PlainEngine { params, masks: None }
    }

    pub fn with_masks(params: Params, masks: impl IntoIterator<Item = u64>) -> Self {
        PlainEngine { params, masks: Some(masks.into_iter().collect()) }
    }

    pub fn masks_left(&self) -> Option<usize> {
        self.masks.as_ref().map(|m| m.len())
    }

    fn ring(&self) -> Ring {
        self.params.ring()
    }

    fn same_shape(a: &Matrix, b: &Matrix, op: &str) -> Result<()> {
        if a.shape() != b.shape() {
            return Err(Error::Argument(format!("{op} of {:?} and {:?}", a.shape(), b.shape())));
        }
        Ok(())
    }

    /// Truncation of one entry with an optional mask.
    pub fn trunc_value(ring: Ring, f: u32, z: u64, mask: Option<u64>) -> u64 {
        match mask {
            Some(r) => ring.add(ring.shift_signed(ring.sub(z, r), f), r >> f),
            None => ring.shift_signed(z, f),
        }
    }

    /// `[x >= 0]` as 0/1.
    fn nonneg(&self, x: u64) -> u64 {
        u64::from(!self.ring().msb(x))
    }
}

impl Engine for PlainEngine {
    type V = Matrix;

    fn params(&self) -> &Params {
        &self.params
    }

    fn input(&mut self, _owner: PartyId, value: Option<&Matrix>, shape: (usize, usize)) -> Result<Matrix> {
        let v = value.ok_or_else(|| Error::Argument("the cleartext engine needs every input".into()))?;
        if v.shape() != shape {
            return Err(Error::Shape(format!("input {:?} announced as {shape:?}", v.shape())));
        }
        Ok(v.clone())
    }

    fn matmul(&mut self, a: &Matrix, b: &Matrix) -> Result<Matrix> {
        a.matmul(b, self.ring())
    }

    fn mul(&mut self, a: &Matrix, b: &Matrix) -> Result<Matrix> {
        Self::same_shape(a, b, "mul")?;
        a.hadamard(b, self.ring())
    }

    fn trunc(&mut self, z: &Matrix) -> Result<Matrix> {
        let ring = self.ring();
        let f = self.params.frac_bits();
        let mut out = z.clone();
        for v in out.data_mut() {
            let mask = match self.masks.as_mut() {
                Some(q) => Some(q.pop_front()
                    .ok_or_else(|| Error::PreprocUnderflow("truncation masks ran out".into()))?),
                None => None,
            };
            *v = Self::trunc_value(ring, f, *v, mask);
        }
        Ok(out)
    }

    fn relu(&mut self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let bits = x.map(|v| self.nonneg(v));
        let y = x.hadamard(&bits, self.ring())?;
        Ok((y, bits))
    }

    fn sigmoid(&mut self, x: &Matrix) -> Result<Matrix> {
        let ring = self.ring();
        let half = 1u64 << (self.params.frac_bits() - 1);
        let one = self.params.codec.one();
        Ok(x.map(|v| {
            let up = ring.add(v, half);
            let down = ring.sub(v, half);
            let b1 = ring.msb(up);
            let b2 = ring.msb(down);
            let mid = u64::from(!b1 && b2);
            let high = u64::from(!b2);
            ring.add(ring.mul(mid, up), ring.mul(high, one))
        }))
    }

    fn add(&self, a: &Matrix, b: &Matrix) -> Result<Matrix> {
        a.add(b, self.ring())
    }

    fn sub(&self, a: &Matrix, b: &Matrix) -> Result<Matrix> {
        a.sub(b, self.ring())
    }

    fn scale(&self, a: &Matrix, k: u64) -> Matrix {
        a.scale(k, self.ring())
    }

    fn transpose(&self, a: &Matrix) -> Matrix {
        a.transpose()
    }

    fn select_rows(&self, a: &Matrix, rows: &[usize]) -> Matrix {
        a.select_rows(rows)
    }

    fn vstack(&self, parts: &[&Matrix]) -> Result<Matrix> {
        let owned: Vec<Matrix> = parts.iter().map(|m| (*m).clone()).collect();
        Matrix::vstack(&owned)
    }

    fn reveal(&mut self, a: &Matrix) -> Result<Option<Matrix>> {
        Ok(Some(a.clone()))
    }
}

/// Walks a computation on shapes alone and totals the preprocessing it
/// would consume, following the same mode switch as the parties.
pub struct Planner {
    params: Params,
    mode: Mode,
    plan: Plan,
}

impl Planner {
    pub fn new(params: Params) -> Self {
        Planner { params, mode: Mode::ThreeParty, plan: Plan::default() }
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn into_plan(self) -> Plan {
        self.plan
    }

    fn flavor(&self) -> Flavor {
        match self.mode {
            Mode::ThreeParty => Flavor::Three,
            Mode::TwoPartyAfterDrop => Flavor::Two,
        }
    }

    fn parties(&self) -> usize {
        self.mode.live().len()
    }

    fn msb(&mut self, k: usize) {
        let (ands, _) = CountingBits::msb_cost(self.params.ell(), self.parties());
        self.plan.bool_triples[self.flavor().index()] += ands * k;
    }

    fn bit2a(&mut self, k: usize) {
        self.plan.dabits[self.flavor().index()] += k;
    }

    fn a2v(&mut self, k: usize) {
        let co = self.params.vsss.coeffs();
        let divide = match self.mode {
            Mode::ThreeParty => co.c.iter().all(|c| c & 1 == 1),
            Mode::TwoPartyAfterDrop => co.c_prime.iter().all(|c| c & 1 == 1),
        };
        if divide && self.mode == Mode::ThreeParty {
            self.plan.k_shares += k;
        }
    }

    fn same(a: &(usize, usize), b: &(usize, usize), op: &str) -> Result<()> {
        if a != b {
            return Err(Error::Argument(format!("{op} of {a:?} and {b:?}")));
        }
        Ok(())
    }
}

impl Engine for Planner {
    type V = (usize, usize);

    fn params(&self) -> &Params {
        &self.params
    }

    fn input(&mut self, _owner: PartyId, _value: Option<&Matrix>, shape: (usize, usize)) -> Result<(usize, usize)> {
        Ok(shape)
    }

    fn matmul(&mut self, a: &(usize, usize), b: &(usize, usize)) -> Result<(usize, usize)> {
        if a.1 != b.0 {
            return Err(Error::Argument(format!("matmul of {a:?} and {b:?}")));
        }
        self.plan.matrix_triples.push((a.0, a.1, b.1));
        Ok((a.0, b.1))
    }

    fn mul(&mut self, a: &(usize, usize), b: &(usize, usize)) -> Result<(usize, usize)> {
        Self::same(a, b, "mul")?;
        self.plan.vmt += a.0 * a.1;
        Ok(*a)
    }

    fn trunc(&mut self, z: &(usize, usize)) -> Result<(usize, usize)> {
        self.plan.trunc += z.0 * z.1;
        Ok(*z)
    }

    fn relu(&mut self, x: &(usize, usize)) -> Result<((usize, usize), (usize, usize))> {
        let k = x.0 * x.1;
        self.msb(k);
        self.bit2a(k);
        self.a2v(k);
        let y = self.mul(x, x)?;
        Ok((y, *x))
    }

    fn sigmoid(&mut self, x: &(usize, usize)) -> Result<(usize, usize)> {
        let k = x.0 * x.1;
        self.msb(2 * k);
        self.plan.bool_triples[self.flavor().index()] += k;
        self.bit2a(2 * k);
        self.a2v(2 * k);
        self.mul(x, x)
    }

    fn add(&self, a: &(usize, usize), b: &(usize, usize)) -> Result<(usize, usize)> {
        Self::same(a, b, "add")?;
        Ok(*a)
    }

    fn sub(&self, a: &(usize, usize), b: &(usize, usize)) -> Result<(usize, usize)> {
        Self::same(a, b, "sub")?;
        Ok(*a)
    }

    fn scale(&self, a: &(usize, usize), _k: u64) -> (usize, usize) {
        *a
    }

    fn transpose(&self, a: &(usize, usize)) -> (usize, usize) {
        (a.1, a.0)
    }

    fn select_rows(&self, a: &(usize, usize), rows: &[usize]) -> (usize, usize) {
        (rows.len(), a.1)
    }

    fn vstack(&self, parts: &[&(usize, usize)]) -> Result<(usize, usize)> {
        let cols = parts.first().map(|p| p.1).unwrap_or(0);
        if parts.iter().any(|p| p.1 != cols) {
            return Err(Error::Shape("vstack of differing widths".into()));
        }
        Ok((parts.iter().map(|p| p.0).sum(), cols))
    }

    fn reveal(&mut self, _a: &(usize, usize)) -> Result<Option<Matrix>> {
        Ok(None)
    }

    fn begin_iteration(&mut self, _t: usize, drop_here: bool) -> Result<bool> {
        if drop_here && self.mode == Mode::ThreeParty {
            self.mode = Mode::TwoPartyAfterDrop;
        }
        Ok(true)
    }
}
