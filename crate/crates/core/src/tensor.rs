//! Linear operators on tensor powers V^(x)n.
//!
//! Two representations are kept side by side. A `Dense` operator stores the
//! full matrix over the d^n product basis; a `Monomial` operator stores, for
//! each input basis vector, the single output basis vector and the scalar it
//! is mapped to. Lifts of set-theoretic solutions are monomial, and products
//! of placed monomial operators stay monomial, which is what makes exhaustive
//! checks on V^(x)6 and larger ambient spaces cheap.
//!
//! Basis order is big-endian: factor 1 is the most significant digit of the
//! flattened index. All factor positions in this module are 1-based.

use std::sync::atomic::{AtomicU64, Ordering};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::scalars::{RingDescriptor, RingElement, Scalar};

/// Default cap on dense (and monomial) entry allocations.
pub const DEFAULT_DENSE_BUDGET: u64 = 1 << 26;

static DENSE_BUDGET: AtomicU64 = AtomicU64::new(DEFAULT_DENSE_BUDGET);

/// Current allocation budget, in matrix entries.
pub fn dense_budget() -> u64 {
    DENSE_BUDGET.load(Ordering::Relaxed)
}

/// Overrides the allocation budget (the CLI exposes this as `--budget`).
pub fn set_dense_budget(entries: u64) {
    DENSE_BUDGET.store(entries.max(1), Ordering::Relaxed);
}

fn check_budget(needed: u128) -> Result<()> {
    let budget = dense_budget();
    if needed > budget as u128 {
        Err(Error::BudgetExceeded { needed, budget })
    } else {
        Ok(())
    }
}

/// Dimension data of V^(x)n: `dim` is d = dim V, `factors` is n.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpaceShape {
    pub dim: usize,
    pub factors: usize,
}

impl SpaceShape {
    /// Refuses shapes whose total dimension d^n exceeds 2^31.
    pub fn new(dim: usize, factors: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpec("dimension must be positive".into()));
        }
        let mut total: u128 = 1;
        for _ in 0..factors {
            total *= dim as u128;
            if total > 1 << 31 {
                return Err(Error::InvalidSpec(format!(
                    "total dimension {dim}^{factors} exceeds 2^31"
                )));
            }
        }
        Ok(SpaceShape { dim, factors })
    }

    /// d^n, the dimension of the full product space.
    pub fn total(&self) -> usize {
        self.dim.pow(self.factors as u32)
    }

    /// Big-endian digits of a flattened basis index.
    pub fn digits_of(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.factors];
        for slot in (0..self.factors).rev() {
            digits[slot] = index % self.dim;
            index /= self.dim;
        }
        digits
    }

    /// Flattened index of big-endian digits.
    pub fn index_of(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.factors);
        digits.iter().fold(0, |acc, &d| acc * self.dim + d)
    }

    fn describe(&self) -> String {
        format!("{}^(x){}", self.dim, self.factors)
    }
}

#[derive(Clone, Debug)]
enum Repr {
    /// Row-major matrix over the product basis.
    Dense(Vec<Scalar>),
    /// One `(out, coeff)` pair per input basis vector.
    Monomial(Vec<(usize, Scalar)>),
}

/// A linear operator on V^(x)n over a fixed scalar ring.
///
/// Operators are immutable values; every operation returns a new one.
#[derive(Clone, Debug)]
pub struct TensorOperator {
    ring: RingDescriptor,
    shape: SpaceShape,
    repr: Repr,
}

impl TensorOperator {
    pub fn ring(&self) -> RingDescriptor {
        self.ring
    }

    pub fn shape(&self) -> SpaceShape {
        self.shape
    }

    pub fn is_monomial(&self) -> bool {
        matches!(self.repr, Repr::Monomial(_))
    }

    // -- constructors -------------------------------------------------------

    pub fn identity(ring: RingDescriptor, shape: SpaceShape) -> Self {
        let one = ring.one_scalar();
        let entries = (0..shape.total()).map(|i| (i, one.clone())).collect();
        TensorOperator { ring, shape, repr: Repr::Monomial(entries) }
    }

    pub fn zero(ring: RingDescriptor, shape: SpaceShape) -> Self {
        let z = ring.zero_scalar();
        let entries = (0..shape.total()).map(|i| (i, z.clone())).collect();
        TensorOperator { ring, shape, repr: Repr::Monomial(entries) }
    }

    /// Monomial operator from an explicit `input -> (output, coeff)` table.
    pub fn monomial(
        ring: RingDescriptor,
        shape: SpaceShape,
        entries: Vec<(usize, RingElement)>,
    ) -> Result<Self> {
        check_budget(shape.total() as u128)?;
        if entries.len() != shape.total() {
            return Err(Error::InvalidInput(format!(
                "monomial table has {} entries, expected {}",
                entries.len(),
                shape.total()
            )));
        }
        let mut table = Vec::with_capacity(entries.len());
        for (out, coeff) in entries {
            if out >= shape.total() {
                return Err(Error::InvalidInput(format!(
                    "output index {out} out of range for {}",
                    shape.describe()
                )));
            }
            if coeff.ring() != ring {
                return Err(Error::RingMismatch {
                    left: ring.to_string(),
                    right: coeff.ring().to_string(),
                });
            }
            table.push((out, coeff.into_scalar()));
        }
        Ok(TensorOperator { ring, shape, repr: Repr::Monomial(table) })
    }

    /// Monomial operator induced by a basis permutation (all coefficients 1).
    pub fn permutation(
        ring: RingDescriptor,
        shape: SpaceShape,
        map: impl Fn(usize) -> usize,
    ) -> Result<Self> {
        check_budget(shape.total() as u128)?;
        let one = ring.one_scalar();
        let mut table = Vec::with_capacity(shape.total());
        for i in 0..shape.total() {
            let out = map(i);
            if out >= shape.total() {
                return Err(Error::InvalidInput(format!("permutation image {out} out of range")));
            }
            table.push((out, one.clone()));
        }
        Ok(TensorOperator { ring, shape, repr: Repr::Monomial(table) })
    }

    /// The transposition P on V (x) V, `e_a (x) e_b -> e_b (x) e_a`.
    pub fn transposition(ring: RingDescriptor, dim: usize) -> Result<Self> {
        let shape = SpaceShape::new(dim, 2)?;
        Self::permutation(ring, shape, |i| {
            let (a, b) = (i / dim, i % dim);
            b * dim + a
        })
    }

    /// The block transposition on V^(x)2w swapping the two w-factor halves.
    pub fn block_transposition(ring: RingDescriptor, dim: usize, width: usize) -> Result<Self> {
        let shape = SpaceShape::new(dim, 2 * width)?;
        let half = dim.pow(width as u32);
        Self::permutation(ring, shape, move |i| {
            let (a, b) = (i / half, i % half);
            b * half + a
        })
    }

    /// Dense operator from row-major entries.
    pub fn dense(
        ring: RingDescriptor,
        shape: SpaceShape,
        rows: Vec<Vec<RingElement>>,
    ) -> Result<Self> {
        let n = shape.total();
        check_budget((n as u128) * (n as u128))?;
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput(format!("dense data is not {n} x {n}")));
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            for e in row {
                if e.ring() != ring {
                    return Err(Error::RingMismatch {
                        left: ring.to_string(),
                        right: e.ring().to_string(),
                    });
                }
                data.push(e.into_scalar());
            }
        }
        Ok(TensorOperator { ring, shape, repr: Repr::Dense(data) })
    }

    /// Dense operator from an integer matrix, mainly for tests and examples.
    pub fn dense_from_i64(ring: RingDescriptor, shape: SpaceShape, rows: &[Vec<i64>]) -> Result<Self> {
        let converted = rows
            .iter()
            .map(|r| r.iter().map(|&v| ring.from_i64(v)).collect())
            .collect();
        Self::dense(ring, shape, converted)
    }

    fn dense_zero(ring: RingDescriptor, shape: SpaceShape) -> Result<Self> {
        let n = shape.total();
        check_budget((n as u128) * (n as u128))?;
        Ok(TensorOperator {
            ring,
            shape,
            repr: Repr::Dense(vec![ring.zero_scalar(); n * n]),
        })
    }

    // -- entry access -------------------------------------------------------

    fn entry_scalar(&self, row: usize, col: usize) -> Scalar {
        match &self.repr {
            Repr::Dense(data) => data[row * self.shape.total() + col].clone(),
            Repr::Monomial(table) => {
                let (out, coeff) = &table[col];
                if *out == row {
                    coeff.clone()
                } else {
                    self.ring.zero_scalar()
                }
            }
        }
    }

    pub fn entry(&self, row: usize, col: usize) -> RingElement {
        self.ring.element(self.entry_scalar(row, col))
    }

    /// Densifies a monomial operator (identity on dense input).
    pub fn to_dense(&self) -> Result<TensorOperator> {
        match &self.repr {
            Repr::Dense(_) => Ok(self.clone()),
            Repr::Monomial(table) => {
                let n = self.shape.total();
                let mut out = Self::dense_zero(self.ring, self.shape)?;
                if let Repr::Dense(data) = &mut out.repr {
                    for (col, (row, coeff)) in table.iter().enumerate() {
                        data[row * n + col] = coeff.clone();
                    }
                }
                Ok(out)
            }
        }
    }

    fn same_ring(&self, other: &Self) -> Result<()> {
        if self.ring == other.ring {
            Ok(())
        } else {
            Err(Error::RingMismatch {
                left: self.ring.to_string(),
                right: other.ring.to_string(),
            })
        }
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.shape == other.shape {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                left: self.shape.describe(),
                right: other.shape.describe(),
            })
        }
    }

    // -- algebra ------------------------------------------------------------

    /// Operator composition: `(a.compose(b)) v = a (b v)`, the matrix product
    /// a * b. Monomial composed with monomial stays monomial.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.same_ring(other)?;
        self.same_shape(other)?;
        let n = self.shape.total();
        match (&self.repr, &other.repr) {
            (Repr::Monomial(a), Repr::Monomial(b)) => {
                let mut table = Vec::with_capacity(n);
                for (mid, s) in b {
                    let (out, t) = &a[*mid];
                    table.push((*out, self.ring.mul_scalar(t, s)));
                }
                Ok(TensorOperator { ring: self.ring, shape: self.shape, repr: Repr::Monomial(table) })
            }
            (Repr::Monomial(a), Repr::Dense(b)) => {
                // rows of the result: row out(k) accumulates coeff(k) * row k of b
                let mut out = Self::dense_zero(self.ring, self.shape)?;
                if let Repr::Dense(data) = &mut out.repr {
                    for (k, (row_out, coeff)) in a.iter().enumerate() {
                        if self.ring.is_zero_scalar(coeff) {
                            continue;
                        }
                        for col in 0..n {
                            let term = self.ring.mul_scalar(coeff, &b[k * n + col]);
                            let cell = &mut data[row_out * n + col];
                            *cell = self.ring.add_scalar(cell, &term);
                        }
                    }
                }
                Ok(out)
            }
            (Repr::Dense(a), Repr::Monomial(b)) => {
                // columns of the result: column j is coeff(j) * column out(j) of a
                let mut out = Self::dense_zero(self.ring, self.shape)?;
                if let Repr::Dense(data) = &mut out.repr {
                    for (col, (mid, coeff)) in b.iter().enumerate() {
                        if self.ring.is_zero_scalar(coeff) {
                            continue;
                        }
                        for row in 0..n {
                            data[row * n + col] = self.ring.mul_scalar(coeff, &a[row * n + mid]);
                        }
                    }
                }
                Ok(out)
            }
            (Repr::Dense(a), Repr::Dense(b)) => {
                let mut out = Self::dense_zero(self.ring, self.shape)?;
                if let Repr::Dense(data) = &mut out.repr {
                    for row in 0..n {
                        for k in 0..n {
                            let lhs = &a[row * n + k];
                            if self.ring.is_zero_scalar(lhs) {
                                continue;
                            }
                            for col in 0..n {
                                let rhs = &b[k * n + col];
                                if self.ring.is_zero_scalar(rhs) {
                                    continue;
                                }
                                let term = self.ring.mul_scalar(lhs, rhs);
                                let cell = &mut data[row * n + col];
                                *cell = self.ring.add_scalar(cell, &term);
                            }
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// Kronecker product `a (x) b`; both factors must share dim and ring.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        self.same_ring(other)?;
        if self.shape.dim != other.shape.dim {
            return Err(Error::ShapeMismatch {
                left: self.shape.describe(),
                right: other.shape.describe(),
            });
        }
        let shape = SpaceShape::new(self.shape.dim, self.shape.factors + other.shape.factors)?;
        let nb = other.shape.total();
        match (&self.repr, &other.repr) {
            (Repr::Monomial(a), Repr::Monomial(b)) => {
                check_budget(shape.total() as u128)?;
                let mut table = Vec::with_capacity(shape.total());
                for (outa, sa) in a {
                    for (outb, sb) in b {
                        table.push((outa * nb + outb, self.ring.mul_scalar(sa, sb)));
                    }
                }
                Ok(TensorOperator { ring: self.ring, shape, repr: Repr::Monomial(table) })
            }
            _ => {
                let a = self.to_dense()?;
                let b = other.to_dense()?;
                let (Repr::Dense(da), Repr::Dense(db)) = (&a.repr, &b.repr) else {
                    unreachable!()
                };
                let na = self.shape.total();
                let mut out = Self::dense_zero(self.ring, shape)?;
                if let Repr::Dense(data) = &mut out.repr {
                    let n = shape.total();
                    for ra in 0..na {
                        for ca in 0..na {
                            let va = &da[ra * na + ca];
                            if self.ring.is_zero_scalar(va) {
                                continue;
                            }
                            for rb in 0..nb {
                                for cb in 0..nb {
                                    let vb = &db[rb * nb + cb];
                                    if self.ring.is_zero_scalar(vb) {
                                        continue;
                                    }
                                    data[(ra * nb + rb) * n + (ca * nb + cb)] =
                                        self.ring.mul_scalar(va, vb);
                                }
                            }
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_ring(other)?;
        self.same_shape(other)?;
        let a = self.to_dense()?;
        let b = other.to_dense()?;
        let (Repr::Dense(da), Repr::Dense(db)) = (&a.repr, &b.repr) else { unreachable!() };
        let data = da
            .iter()
            .zip(db.iter())
            .map(|(x, y)| self.ring.add_scalar(x, y))
            .collect();
        Ok(TensorOperator { ring: self.ring, shape: self.shape, repr: Repr::Dense(data) })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_ring(other)?;
        self.same_shape(other)?;
        let a = self.to_dense()?;
        let b = other.to_dense()?;
        let (Repr::Dense(da), Repr::Dense(db)) = (&a.repr, &b.repr) else { unreachable!() };
        let data = da
            .iter()
            .zip(db.iter())
            .map(|(x, y)| self.ring.sub_scalar(x, y))
            .collect();
        Ok(TensorOperator { ring: self.ring, shape: self.shape, repr: Repr::Dense(data) })
    }

    pub fn scale(&self, factor: &RingElement) -> Result<Self> {
        if factor.ring() != self.ring {
            return Err(Error::RingMismatch {
                left: self.ring.to_string(),
                right: factor.ring().to_string(),
            });
        }
        let f = factor.scalar();
        let repr = match &self.repr {
            Repr::Monomial(t) => Repr::Monomial(
                t.iter().map(|(o, s)| (*o, self.ring.mul_scalar(s, f))).collect(),
            ),
            Repr::Dense(d) => Repr::Dense(d.iter().map(|s| self.ring.mul_scalar(s, f)).collect()),
        };
        Ok(TensorOperator { ring: self.ring, shape: self.shape, repr })
    }

    /// `a b - b a`; exact zero test on exact rings via [`Self::is_zero`].
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let ab = self.compose(other)?;
        let ba = other.compose(self)?;
        ab.sub(&ba)
    }

    /// n-th power under composition.
    pub fn power(&self, n: u64) -> Result<Self> {
        let mut acc = Self::identity(self.ring, self.shape);
        for _ in 0..n {
            acc = self.compose(&acc)?;
        }
        Ok(acc)
    }

    // -- partial trace ------------------------------------------------------

    /// Traces out the listed factors (1-based); the result lives on the
    /// remaining factors in their original order. Tracing all factors yields
    /// a 0-factor operator, i.e. a 1 x 1 matrix holding the full trace.
    pub fn partial_trace(&self, over: &[usize]) -> Result<Self> {
        let n = self.shape.factors;
        let mut traced = vec![false; n];
        for &f in over {
            if f == 0 || f > n {
                return Err(Error::InvalidPositions(format!(
                    "trace index {f} out of range 1..={n}"
                )));
            }
            if traced[f - 1] {
                return Err(Error::InvalidPositions(format!("trace index {f} repeated")));
            }
            traced[f - 1] = true;
        }
        let kept: Vec<usize> = (0..n).filter(|i| !traced[*i]).collect();
        let out_shape = SpaceShape::new(self.shape.dim, kept.len())?;
        let m = out_shape.total();
        check_budget((m as u128) * (m as u128))?;
        let traced_slots: Vec<usize> = (0..n).filter(|i| traced[*i]).collect();
        let traced_total = self.shape.dim.pow(traced_slots.len() as u32);

        let mut out = Self::dense_zero(self.ring, out_shape)?;
        let Repr::Dense(acc) = &mut out.repr else { unreachable!() };

        match &self.repr {
            Repr::Monomial(table) => {
                for (col, (row, coeff)) in table.iter().enumerate() {
                    if self.ring.is_zero_scalar(coeff) {
                        continue;
                    }
                    let cd = self.shape.digits_of(col);
                    let rd = self.shape.digits_of(*row);
                    if traced_slots.iter().any(|&s| cd[s] != rd[s]) {
                        continue;
                    }
                    let rk: Vec<usize> = kept.iter().map(|&s| rd[s]).collect();
                    let ck: Vec<usize> = kept.iter().map(|&s| cd[s]).collect();
                    let idx = out_shape.index_of(&rk) * m + out_shape.index_of(&ck);
                    acc[idx] = self.ring.add_scalar(&acc[idx], coeff);
                }
            }
            Repr::Dense(data) => {
                let total = self.shape.total();
                let mut full_r = vec![0usize; n];
                let mut full_c = vec![0usize; n];
                for rk in 0..m {
                    let rkd = out_shape.digits_of(rk);
                    for ck in 0..m {
                        let ckd = out_shape.digits_of(ck);
                        let mut sum = self.ring.zero_scalar();
                        for v in 0..traced_total {
                            let vshape = SpaceShape { dim: self.shape.dim, factors: traced_slots.len() };
                            let vd = vshape.digits_of(v);
                            for (i, &s) in kept.iter().enumerate() {
                                full_r[s] = rkd[i];
                                full_c[s] = ckd[i];
                            }
                            for (i, &s) in traced_slots.iter().enumerate() {
                                full_r[s] = vd[i];
                                full_c[s] = vd[i];
                            }
                            let row = self.shape.index_of(&full_r);
                            let col = self.shape.index_of(&full_c);
                            debug_assert!(row < total && col < total);
                            sum = self.ring.add_scalar(&sum, &data[row * total + col]);
                        }
                        acc[rk * m + ck] = sum;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Trace over every factor, as a ring element.
    pub fn full_trace(&self) -> Result<RingElement> {
        let all: Vec<usize> = (1..=self.shape.factors).collect();
        let t = self.partial_trace(&all)?;
        Ok(t.entry(0, 0))
    }

    // -- inversion ----------------------------------------------------------

    /// Exact inverse. Monomial operators invert by reversing the index
    /// bijection and inverting coefficients; dense operators over a field use
    /// Gauss-Jordan elimination; dense operators over Z/p^k Hensel-lift the
    /// inverse mod p (general moduli combine prime powers by CRT).
    pub fn inverse(&self) -> Result<Self> {
        match &self.repr {
            Repr::Monomial(table) => {
                let n = self.shape.total();
                let mut inv: Vec<Option<(usize, Scalar)>> = vec![None; n];
                for (col, (row, coeff)) in table.iter().enumerate() {
                    if !self.ring.is_unit_scalar(coeff) {
                        return Err(Error::NotInvertible(format!(
                            "coefficient {} at input {col} is not a unit",
                            self.ring.format_scalar(coeff)
                        )));
                    }
                    if inv[*row].is_some() {
                        return Err(Error::NotInvertible(format!(
                            "index map is not a bijection: output {row} repeated"
                        )));
                    }
                    inv[*row] = Some((col, self.ring.inv_scalar(coeff)?));
                }
                let table = inv
                    .into_iter()
                    .map(|e| e.ok_or_else(|| Error::NotInvertible("index map is not onto".into())))
                    .collect::<Result<Vec<_>>>()?;
                Ok(TensorOperator { ring: self.ring, shape: self.shape, repr: Repr::Monomial(table) })
            }
            Repr::Dense(data) => match self.ring {
                RingDescriptor::ModRing(m) => self.inverse_dense_modular(data, m),
                _ => self.inverse_dense_field(data),
            },
        }
    }

    fn inverse_dense_field(&self, data: &[Scalar]) -> Result<Self> {
        let n = self.shape.total();
        let ring = self.ring;
        let mut a: Vec<Scalar> = data.to_vec();
        let mut b: Vec<Scalar> = {
            let mut id = vec![ring.zero_scalar(); n * n];
            for i in 0..n {
                id[i * n + i] = ring.one_scalar();
            }
            id
        };
        for col in 0..n {
            // pivot search: first unit for exact rings, largest magnitude for floats
            let mut pivot = None;
            for row in col..n {
                let cand = &a[row * n + col];
                if ring.is_unit_scalar(cand) {
                    match (&self.ring, &pivot) {
                        (RingDescriptor::ComplexFloat(_), Some(p)) => {
                            let prev: &Scalar = &a[*p * n + col];
                            if ring.lt_abs_scalar(prev, cand) {
                                pivot = Some(row);
                            }
                        }
                        (RingDescriptor::ComplexFloat(_), None) => pivot = Some(row),
                        _ => {
                            pivot = Some(row);
                            break;
                        }
                    }
                }
            }
            let pivot = pivot.ok_or_else(|| {
                Error::NotInvertible(format!("no unit pivot in column {col}"))
            })?;
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                    b.swap(col * n + j, pivot * n + j);
                }
            }
            let inv = ring.inv_scalar(&a[col * n + col])?;
            for j in 0..n {
                a[col * n + j] = ring.mul_scalar(&a[col * n + j], &inv);
                b[col * n + j] = ring.mul_scalar(&b[col * n + j], &inv);
            }
            for row in 0..n {
                if row == col {
                    continue;
                }
                let factor = a[row * n + col].clone();
                if ring.is_zero_scalar(&factor) {
                    continue;
                }
                for j in 0..n {
                    let ta = ring.mul_scalar(&factor, &a[col * n + j]);
                    a[row * n + j] = ring.sub_scalar(&a[row * n + j], &ta);
                    let tb = ring.mul_scalar(&factor, &b[col * n + j]);
                    b[row * n + j] = ring.sub_scalar(&b[row * n + j], &tb);
                }
            }
        }
        Ok(TensorOperator { ring, shape: self.shape, repr: Repr::Dense(b) })
    }

    fn inverse_dense_modular(&self, data: &[Scalar], m: u64) -> Result<Self> {
        let n = self.shape.total();
        let a: Vec<u64> = data
            .iter()
            .map(|s| match s {
                Scalar::Modular(x) => *x,
                _ => unreachable!(),
            })
            .collect();
        let factors = crate::scalars::factorize_u64(m);
        // inverse modulo each prime power, then CRT
        let mut partial: Vec<(u64, Vec<u64>)> = Vec::new();
        for (p, k) in &factors {
            let pk = p.pow(*k);
            partial.push((pk, invert_mod_prime_power(&a, n, *p, pk)?));
        }
        let mut combined = vec![0u64; n * n];
        for idx in 0..n * n {
            let mut x: u128 = 0;
            let mut modulus: u128 = 1;
            for (pk, inv) in &partial {
                let pk = *pk as u128;
                let r = inv[idx] as u128;
                if modulus == 1 {
                    x = r;
                    modulus = pk;
                } else {
                    // solve x' = x mod modulus, x' = r mod pk
                    let inv_mod = crate::scalars::mod_inverse_u64((modulus % pk) as u64, pk as u64)
                        .expect("coprime prime powers") as u128;
                    let diff = (r + pk - x % pk) % pk;
                    x += modulus * ((diff * inv_mod) % pk);
                    modulus *= pk;
                }
            }
            combined[idx] = (x % m as u128) as u64;
        }
        let out = TensorOperator {
            ring: self.ring,
            shape: self.shape,
            repr: Repr::Dense(combined.into_iter().map(Scalar::Modular).collect()),
        };
        // verify: Hensel lifting converged and the CRT glue is consistent
        let id = Self::identity(self.ring, self.shape);
        if !self.compose(&out)?.equal(&id)? {
            return Err(Error::NotInvertible("verification A * A^-1 = 1 failed".into()));
        }
        Ok(out)
    }

    // -- comparison ---------------------------------------------------------

    pub fn is_zero(&self) -> bool {
        match &self.repr {
            Repr::Monomial(t) => t.iter().all(|(_, s)| self.ring.is_zero_scalar(s)),
            Repr::Dense(d) => d.iter().all(|s| self.ring.is_zero_scalar(s)),
        }
    }

    pub fn equal(&self, other: &Self) -> Result<bool> {
        Ok(self.first_difference(other)?.is_none())
    }

    /// First differing matrix entry in column-major order of the inputs, as
    /// `(row, col, left, right)`. Monomial pairs are compared without
    /// densifying, so this stays cheap on large ambient spaces.
    pub fn first_difference(&self, other: &Self) -> Result<Option<Difference>> {
        self.same_ring(other)?;
        self.same_shape(other)?;
        match (&self.repr, &other.repr) {
            (Repr::Monomial(a), Repr::Monomial(b)) => {
                for (col, ((oa, sa), (ob, sb))) in a.iter().zip(b.iter()).enumerate() {
                    let za = self.ring.is_zero_scalar(sa);
                    let zb = self.ring.is_zero_scalar(sb);
                    if za && zb {
                        continue;
                    }
                    if oa == ob {
                        if !self.ring.eq_scalar(sa, sb) {
                            return Ok(Some(Difference {
                                row: *oa,
                                col,
                                left: self.ring.element(sa.clone()),
                                right: self.ring.element(sb.clone()),
                            }));
                        }
                    } else if !za {
                        return Ok(Some(Difference {
                            row: *oa,
                            col,
                            left: self.ring.element(sa.clone()),
                            right: self.ring.element(other.entry_scalar(*oa, col)),
                        }));
                    } else {
                        return Ok(Some(Difference {
                            row: *ob,
                            col,
                            left: self.ring.element(self.entry_scalar(*ob, col)),
                            right: self.ring.element(sb.clone()),
                        }));
                    }
                }
                Ok(None)
            }
            _ => {
                let a = self.to_dense()?;
                let b = other.to_dense()?;
                let (Repr::Dense(da), Repr::Dense(db)) = (&a.repr, &b.repr) else {
                    unreachable!()
                };
                let n = self.shape.total();
                for col in 0..n {
                    for row in 0..n {
                        let x = &da[row * n + col];
                        let y = &db[row * n + col];
                        if !self.ring.eq_scalar(x, y) {
                            return Ok(Some(Difference {
                                row,
                                col,
                                left: self.ring.element(x.clone()),
                                right: self.ring.element(y.clone()),
                            }));
                        }
                    }
                }
                Ok(None)
            }
        }
    }

    /// Largest entry magnitude, used for residual reporting.
    pub fn max_abs_entry(&self) -> RingElement {
        let mut best = self.ring.zero_scalar();
        let mut consider = |s: &Scalar| {
            if self.ring.lt_abs_scalar(&best, s) {
                best = self.ring.abs_scalar(s);
            }
        };
        match &self.repr {
            Repr::Monomial(t) => t.iter().for_each(|(_, s)| consider(s)),
            Repr::Dense(d) => d.iter().for_each(&mut consider),
        }
        self.ring.element(best)
    }

    // -- reshaping ----------------------------------------------------------

    /// Reinterprets the factor structure without moving data. Valid when the
    /// total dimensions agree and the new dim is a power of the old one (or
    /// vice versa); big-endian flattening makes adjacent grouping exact.
    pub fn regroup(&self, dim: usize, factors: usize) -> Result<Self> {
        let new_shape = SpaceShape::new(dim, factors)?;
        if new_shape.total() != self.shape.total() {
            return Err(Error::ShapeMismatch {
                left: self.shape.describe(),
                right: new_shape.describe(),
            });
        }
        Ok(TensorOperator { ring: self.ring, shape: new_shape, repr: self.repr.clone() })
    }

    // -- serialization ------------------------------------------------------

    /// Dump format: flattened big-endian indices, monomial entries as
    /// `[in, out, scalar]` triples, dense as rows of scalars. A `ring` field
    /// is included so the dump is self-contained.
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "ring": self.ring.to_json(),
            "dim": self.shape.dim,
            "factors": self.shape.factors,
        });
        match &self.repr {
            Repr::Monomial(t) => {
                v["repr"] = json!("monomial");
                v["entries"] = Value::Array(
                    t.iter()
                        .enumerate()
                        .map(|(i, (o, s))| json!([i, o, self.ring.scalar_to_json(s)]))
                        .collect(),
                );
            }
            Repr::Dense(d) => {
                let n = self.shape.total();
                v["repr"] = json!("dense");
                v["rows"] = Value::Array(
                    (0..n)
                        .map(|r| {
                            Value::Array(
                                (0..n)
                                    .map(|c| self.ring.scalar_to_json(&d[r * n + c]))
                                    .collect(),
                            )
                        })
                        .collect(),
                );
            }
        }
        v
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidInput(format!("operator dump: {msg}"));
        let ring = RingDescriptor::from_json(v.get("ring").ok_or_else(|| bad("missing ring"))?)?;
        let dim = v.get("dim").and_then(Value::as_u64).ok_or_else(|| bad("missing dim"))? as usize;
        let factors =
            v.get("factors").and_then(Value::as_u64).ok_or_else(|| bad("missing factors"))? as usize;
        let shape = SpaceShape::new(dim, factors)?;
        match v.get("repr").and_then(Value::as_str) {
            Some("monomial") => {
                let entries = v
                    .get("entries")
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad("missing entries"))?;
                let mut table = vec![None; shape.total()];
                for e in entries {
                    let triple = e.as_array().filter(|a| a.len() == 3).ok_or_else(|| bad("entry"))?;
                    let input = triple[0].as_u64().ok_or_else(|| bad("entry input"))? as usize;
                    let out = triple[1].as_u64().ok_or_else(|| bad("entry output"))? as usize;
                    if input >= shape.total() || out >= shape.total() {
                        return Err(bad("entry index out of range"));
                    }
                    table[input] = Some((out, ring.scalar_from_json(&triple[2])?));
                }
                let table = table
                    .into_iter()
                    .map(|e| e.ok_or_else(|| bad("monomial table not total")))
                    .collect::<Result<Vec<_>>>()?;
                Ok(TensorOperator { ring, shape, repr: Repr::Monomial(table) })
            }
            Some("dense") => {
                let rows = v.get("rows").and_then(Value::as_array).ok_or_else(|| bad("missing rows"))?;
                let n = shape.total();
                if rows.len() != n {
                    return Err(bad("row count"));
                }
                let mut data = Vec::with_capacity(n * n);
                for row in rows {
                    let row = row.as_array().filter(|r| r.len() == n).ok_or_else(|| bad("row"))?;
                    for cell in row {
                        data.push(ring.scalar_from_json(cell)?);
                    }
                }
                Ok(TensorOperator { ring, shape, repr: Repr::Dense(data) })
            }
            _ => Err(bad("unknown repr")),
        }
    }
}

/// One differing entry between two operators.
#[derive(Clone, Debug)]
pub struct Difference {
    pub row: usize,
    pub col: usize,
    pub left: RingElement,
    pub right: RingElement,
}

fn invert_mod_prime_power(a: &[u64], n: usize, p: u64, pk: u64) -> Result<Vec<u64>> {
    let mut x = invert_mod_prime(a, n, p)?;
    // Newton iteration X <- X (2I - A X) doubles the p-adic precision
    let mut precision = p;
    while precision < pk {
        precision = precision.saturating_mul(precision).min(pk);
        let ax = mat_mul_mod(a, &x, n, pk);
        let mut two_i_minus = vec![0u64; n * n];
        for r in 0..n {
            for c in 0..n {
                let v = ax[r * n + c];
                let mut t = (pk - v % pk) % pk;
                if r == c {
                    t = (t + 2) % pk;
                }
                two_i_minus[r * n + c] = t;
            }
        }
        x = mat_mul_mod(&x, &two_i_minus, n, pk);
    }
    Ok(x)
}

fn invert_mod_prime(a: &[u64], n: usize, p: u64) -> Result<Vec<u64>> {
    let mut m: Vec<u64> = a.iter().map(|v| v % p).collect();
    let mut inv = vec![0u64; n * n];
    for i in 0..n {
        inv[i * n + i] = 1;
    }
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| m[r * n + col] % p != 0)
            .ok_or_else(|| Error::NotInvertible(format!("singular mod {p}: column {col}")))?;
        if pivot != col {
            for j in 0..n {
                m.swap(col * n + j, pivot * n + j);
                inv.swap(col * n + j, pivot * n + j);
            }
        }
        let piv_inv = crate::scalars::mod_inverse_u64(m[col * n + col], p)
            .ok_or_else(|| Error::NotInvertible("pivot not invertible".into()))?;
        for j in 0..n {
            m[col * n + j] = mul_mod(m[col * n + j], piv_inv, p);
            inv[col * n + j] = mul_mod(inv[col * n + j], piv_inv, p);
        }
        for row in 0..n {
            if row == col || m[row * n + col] == 0 {
                continue;
            }
            let f = m[row * n + col];
            for j in 0..n {
                let tm = mul_mod(f, m[col * n + j], p);
                m[row * n + j] = (m[row * n + j] + p - tm) % p;
                let ti = mul_mod(f, inv[col * n + j], p);
                inv[row * n + j] = (inv[row * n + j] + p - ti) % p;
            }
        }
    }
    Ok(inv)
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn mat_mul_mod(a: &[u64], b: &[u64], n: usize, m: u64) -> Vec<u64> {
    let mut out = vec![0u64; n * n];
    for r in 0..n {
        for k in 0..n {
            let av = a[r * n + k];
            if av == 0 {
                continue;
            }
            for c in 0..n {
                let t = (av as u128 * b[k * n + c] as u128) % m as u128;
                out[r * n + c] = ((out[r * n + c] as u128 + t) % m as u128) as u64;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// placement
// ---------------------------------------------------------------------------

/// An operator together with the ambient factors it acts on.
///
/// `positions` lists, for each factor of `op` in order, the (1-based) ambient
/// factor it occupies; the operator acts identically elsewhere. This realizes
/// the usual subscript convention for placed operators.
#[derive(Clone, Debug)]
pub struct PlacedOperator {
    pub op: TensorOperator,
    pub positions: Vec<usize>,
    pub ambient: SpaceShape,
}

impl PlacedOperator {
    pub fn new(op: TensorOperator, positions: Vec<usize>, ambient: SpaceShape) -> Result<Self> {
        if op.shape().dim != ambient.dim {
            return Err(Error::ShapeMismatch {
                left: op.shape().describe(),
                right: ambient.describe(),
            });
        }
        if positions.len() != op.shape().factors {
            return Err(Error::InvalidPositions(format!(
                "{} positions for {} factors",
                positions.len(),
                op.shape().factors
            )));
        }
        let mut seen = vec![false; ambient.factors];
        for &p in &positions {
            if p == 0 || p > ambient.factors {
                return Err(Error::InvalidPositions(format!(
                    "position {p} out of range 1..={}",
                    ambient.factors
                )));
            }
            if seen[p - 1] {
                return Err(Error::InvalidPositions(format!("position {p} repeated")));
            }
            seen[p - 1] = true;
        }
        Ok(PlacedOperator { op, positions, ambient })
    }

    /// Image `(out, coeff)` of an ambient basis index under a placed
    /// monomial operator, without materializing the embedding.
    fn map_index(&self, index: usize) -> (usize, Scalar) {
        let Repr::Monomial(table) = &self.op.repr else {
            unreachable!("map_index requires a monomial operator")
        };
        let mut digits = self.ambient.digits_of(index);
        let local_digits: Vec<usize> =
            self.positions.iter().map(|&p| digits[p - 1]).collect();
        let local_in = self.op.shape.index_of(&local_digits);
        let (local_out, coeff) = &table[local_in];
        let out_digits = self.op.shape.digits_of(*local_out);
        for (slot, &p) in self.positions.iter().enumerate() {
            digits[p - 1] = out_digits[slot];
        }
        (self.ambient.index_of(&digits), coeff.clone())
    }
}

/// Materializes a placed operator on its ambient space. Monomial inputs
/// yield monomial outputs.
pub fn embed(placed: &PlacedOperator) -> Result<TensorOperator> {
    let ambient = placed.ambient;
    let ring = placed.op.ring;
    match &placed.op.repr {
        Repr::Monomial(_) => {
            check_budget(ambient.total() as u128)?;
            let table = (0..ambient.total()).map(|i| placed.map_index(i)).collect();
            Ok(TensorOperator { ring, shape: ambient, repr: Repr::Monomial(table) })
        }
        Repr::Dense(data) => {
            let n = ambient.total();
            check_budget((n as u128) * (n as u128))?;
            let local = placed.op.shape;
            let ln = local.total();
            let mut out = TensorOperator::dense_zero(ring, ambient)?;
            let Repr::Dense(acc) = &mut out.repr else { unreachable!() };
            for col in 0..n {
                let digits = ambient.digits_of(col);
                let local_digits: Vec<usize> =
                    placed.positions.iter().map(|&p| digits[p - 1]).collect();
                let lc = local.index_of(&local_digits);
                for lr in 0..ln {
                    let v = &data[lr * ln + lc];
                    if ring.is_zero_scalar(v) {
                        continue;
                    }
                    let mut row_digits = digits.clone();
                    let lrd = local.digits_of(lr);
                    for (slot, &p) in placed.positions.iter().enumerate() {
                        row_digits[p - 1] = lrd[slot];
                    }
                    let row = ambient.index_of(&row_digits);
                    acc[row * n + col] = v.clone();
                }
            }
            Ok(out)
        }
    }
}

/// Ordered product of placed operators on a shared ambient space.
///
/// The factors are multiplied as written: `product([A, B, C]) = A B C`, i.e.
/// C acts on vectors first. When every factor is monomial the product is
/// computed monomially in one pass per factor.
pub fn product_of_placed(
    ring: RingDescriptor,
    ambient: SpaceShape,
    factors: &[PlacedOperator],
) -> Result<TensorOperator> {
    for f in factors {
        if f.ambient != ambient {
            return Err(Error::ShapeMismatch {
                left: f.ambient.describe(),
                right: ambient.describe(),
            });
        }
        if f.op.ring != ring {
            return Err(Error::RingMismatch {
                left: f.op.ring.to_string(),
                right: ring.to_string(),
            });
        }
    }
    if factors.is_empty() {
        return Ok(TensorOperator::identity(ring, ambient));
    }
    if factors.iter().all(|f| f.op.is_monomial()) {
        check_budget(ambient.total() as u128)?;
        let mut table: Vec<(usize, Scalar)> =
            (0..ambient.total()).map(|i| (i, ring.one_scalar())).collect();
        // rightmost factor acts first
        for placed in factors.iter().rev() {
            for entry in table.iter_mut() {
                let (mid, s) = entry.clone();
                let (out, t) = placed.map_index(mid);
                *entry = (out, ring.mul_scalar(&s, &t));
            }
        }
        return Ok(TensorOperator { ring, shape: ambient, repr: Repr::Monomial(table) });
    }
    // general path: embed the rightmost factor, then left-multiply the rest
    let mut acc = embed(&factors[factors.len() - 1])?;
    for placed in factors[..factors.len() - 1].iter().rev() {
        acc = embed(placed)?.compose(&acc)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q() -> RingDescriptor {
        RingDescriptor::rational()
    }

    fn random_dense(ring: RingDescriptor, shape: SpaceShape, rng: &mut ChaCha8Rng) -> TensorOperator {
        let n = shape.total();
        let rows = (0..n)
            .map(|_| (0..n).map(|_| ring.random_small(rng)).collect())
            .collect();
        TensorOperator::dense(ring, shape, rows).unwrap()
    }

    /// Independent triple-loop matrix product used as the composition oracle.
    fn matmul_oracle(a: &TensorOperator, b: &TensorOperator) -> Vec<Vec<RingElement>> {
        let n = a.shape().total();
        (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| {
                        let mut acc = a.ring().zero();
                        for k in 0..n {
                            acc = acc.add(&a.entry(r, k).mul(&b.entry(k, c)).unwrap()).unwrap();
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn shape_guard() {
        assert!(SpaceShape::new(2, 31).is_ok());
        assert!(SpaceShape::new(2, 40).is_err());
        assert_eq!(SpaceShape::new(3, 4).unwrap().total(), 81);
    }

    #[test]
    fn digits_big_endian() {
        let s = SpaceShape::new(3, 3).unwrap();
        assert_eq!(s.digits_of(5), vec![0, 1, 2]);
        assert_eq!(s.index_of(&[0, 1, 2]), 5);
        assert_eq!(s.digits_of(9), vec![1, 0, 0]);
    }

    #[test]
    fn embed_identity_factor() {
        let id = TensorOperator::identity(q(), SpaceShape::new(2, 1).unwrap());
        let ambient = SpaceShape::new(2, 3).unwrap();
        let placed = PlacedOperator::new(id, vec![2], ambient).unwrap();
        let e = embed(&placed).unwrap();
        assert!(e.equal(&TensorOperator::identity(q(), ambient)).unwrap());
    }

    #[test]
    fn embed_transposition() {
        let p = TensorOperator::transposition(q(), 2).unwrap();
        let ambient = SpaceShape::new(2, 3).unwrap();
        let e = embed(&PlacedOperator::new(p, vec![1, 2], ambient).unwrap()).unwrap();
        // e_a (x) e_b (x) e_c -> e_b (x) e_a (x) e_c
        for idx in 0..8 {
            let d = ambient.digits_of(idx);
            let expect = ambient.index_of(&[d[1], d[0], d[2]]);
            assert_eq!(e.entry(expect, idx), q().one());
        }
    }

    #[test]
    fn embed_reversed_positions_conjugates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let shape2 = SpaceShape::new(2, 2).unwrap();
        let m = random_dense(q(), shape2, &mut rng);
        let p = TensorOperator::transposition(q(), 2).unwrap();
        let swapped = embed(&PlacedOperator::new(m.clone(), vec![2, 1], shape2).unwrap()).unwrap();
        let direct = embed(&PlacedOperator::new(m, vec![1, 2], shape2).unwrap()).unwrap();
        let conj = p.compose(&direct).unwrap().compose(&p).unwrap();
        assert!(swapped.equal(&conj).unwrap());
    }

    #[test]
    fn compose_involution() {
        let p = TensorOperator::transposition(q(), 2).unwrap();
        let id = TensorOperator::identity(q(), p.shape());
        assert!(p.compose(&p).unwrap().equal(&id).unwrap());
    }

    #[test]
    fn monomial_compose_multiplies_scalars() {
        let z4 = RingDescriptor::mod_ring(4).unwrap();
        let shape = SpaceShape::new(2, 1).unwrap();
        let a = TensorOperator::monomial(
            z4,
            shape,
            vec![(1, z4.from_i64(3)), (0, z4.from_i64(1))],
        )
        .unwrap();
        let b = a.compose(&a).unwrap();
        // (a.a) e_0 = 3 * a e_1 = 3 * 1 e_0
        assert_eq!(b.entry(0, 0), z4.from_i64(3));
        assert!(b.is_monomial());
    }

    #[test]
    fn compose_matches_matmul_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = SpaceShape::new(2, 2).unwrap();
        let a = random_dense(q(), shape, &mut rng);
        let b = random_dense(q(), shape, &mut rng);
        let prod = a.compose(&b).unwrap();
        let oracle = matmul_oracle(&a, &b);
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(prod.entry(r, c), oracle[r][c]);
            }
        }
    }

    #[test]
    fn partial_trace_of_transposition_is_identity() {
        // sum_i P[(i,j),(i,l)] = delta_jl
        let p = TensorOperator::transposition(q(), 2).unwrap();
        let t = p.partial_trace(&[1]).unwrap();
        let id = TensorOperator::identity(q(), SpaceShape::new(2, 1).unwrap());
        assert!(t.equal(&id).unwrap());
    }

    #[test]
    fn full_trace_of_identity() {
        let id = TensorOperator::identity(q(), SpaceShape::new(2, 2).unwrap());
        assert_eq!(id.full_trace().unwrap(), q().from_i64(4));
    }

    #[test]
    fn trace_factorizes_on_tensor_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = SpaceShape::new(2, 1).unwrap();
        let a = random_dense(q(), shape, &mut rng);
        let b = random_dense(q(), shape, &mut rng);
        let ab = a.tensor(&b).unwrap();
        let traced = ab.partial_trace(&[2]).unwrap();
        let tr_b = b.full_trace().unwrap();
        let expect = a.scale(&tr_b).unwrap();
        assert!(traced.equal(&expect).unwrap());
    }

    #[test]
    fn tracing_identity_factors_scales_by_dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = random_dense(q(), SpaceShape::new(2, 1).unwrap(), &mut rng);
        let ambient = SpaceShape::new(2, 3).unwrap();
        let e = embed(&PlacedOperator::new(m.clone(), vec![2], ambient).unwrap()).unwrap();
        let traced = e.partial_trace(&[1, 3]).unwrap();
        let expect = m.scale(&q().from_i64(4)).unwrap();
        assert!(traced.equal(&expect).unwrap());
    }

    #[test]
    fn inverse_of_transposition() {
        let p = TensorOperator::transposition(q(), 2).unwrap();
        assert!(p.inverse().unwrap().equal(&p).unwrap());
    }

    #[test]
    fn inverse_monomial_mod4() {
        let z4 = RingDescriptor::mod_ring(4).unwrap();
        let shape = SpaceShape::new(2, 1).unwrap();
        let a = TensorOperator::monomial(
            z4,
            shape,
            vec![(0, z4.from_i64(3)), (1, z4.from_i64(1))],
        )
        .unwrap();
        let inv = a.inverse().unwrap();
        assert_eq!(inv.entry(0, 0), z4.from_i64(3));
        assert!(a.compose(&inv).unwrap().equal(&TensorOperator::identity(z4, shape)).unwrap());
    }

    #[test]
    fn inverse_dense_rational() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let shape = SpaceShape::new(2, 2).unwrap();
        // retry until invertible; random small rationals are generically fine
        for _ in 0..16 {
            let m = random_dense(q(), shape, &mut rng);
            if let Ok(inv) = m.inverse() {
                let id = TensorOperator::identity(q(), shape);
                assert!(m.compose(&inv).unwrap().equal(&id).unwrap());
                assert!(inv.compose(&m).unwrap().equal(&id).unwrap());
                return;
            }
        }
        panic!("no invertible sample found");
    }

    #[test]
    fn inverse_dense_mod_prime_power() {
        let z8 = RingDescriptor::mod_ring(8).unwrap();
        let shape = SpaceShape::new(2, 1).unwrap();
        let m = TensorOperator::dense_from_i64(z8, shape, &[vec![1, 2], vec![4, 3]]).unwrap();
        // det = 3 - 8 = -5, a unit mod 8
        let inv = m.inverse().unwrap();
        let id = TensorOperator::identity(z8, shape);
        assert!(m.compose(&inv).unwrap().equal(&id).unwrap());
    }

    #[test]
    fn inverse_dense_composite_modulus() {
        let z6 = RingDescriptor::mod_ring(6).unwrap();
        let shape = SpaceShape::new(2, 1).unwrap();
        // det = 4 - 9 = -5 = 1 mod 6, but no unit pivot in column 0
        let m = TensorOperator::dense_from_i64(z6, shape, &[vec![2, 3], vec![3, 2]]).unwrap();
        let inv = m.inverse().unwrap();
        let id = TensorOperator::identity(z6, shape);
        assert!(m.compose(&inv).unwrap().equal(&id).unwrap());
    }

    #[test]
    fn singular_matrix_rejected() {
        let shape = SpaceShape::new(2, 1).unwrap();
        let m = TensorOperator::dense_from_i64(q(), shape, &[vec![1, 2], vec![2, 4]]).unwrap();
        assert!(matches!(m.inverse(), Err(Error::NotInvertible(_))));
    }

    #[test]
    fn commutator_examples() {
        let p = TensorOperator::transposition(q(), 2).unwrap();
        assert!(p.commutator(&p).unwrap().is_zero());
        let id = TensorOperator::identity(q(), p.shape());
        assert!(id.commutator(&p).unwrap().is_zero());

        // diag(1,2) on factor 1 against P: entry ((1,0),(0,1)) is 2 - 1 = 1
        let d = TensorOperator::dense_from_i64(q(), SpaceShape::new(2, 1).unwrap(), &[
            vec![1, 0],
            vec![0, 2],
        ])
        .unwrap();
        let d1 = embed(&PlacedOperator::new(d, vec![1], p.shape()).unwrap()).unwrap();
        let c = d1.commutator(&p).unwrap();
        assert!(!c.is_zero());
        assert_eq!(c.entry(2, 1), q().from_i64(1));
        assert_eq!(c.entry(1, 2), q().from_i64(-1));
    }

    #[test]
    fn embed_respects_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let shape1 = SpaceShape::new(2, 1).unwrap();
        let ambient = SpaceShape::new(2, 3).unwrap();
        let a = random_dense(q(), shape1, &mut rng);
        let b = random_dense(q(), shape1, &mut rng);
        let ab = a.compose(&b).unwrap();
        let lhs = embed(&PlacedOperator::new(ab, vec![2], ambient).unwrap()).unwrap();
        let ea = embed(&PlacedOperator::new(a, vec![2], ambient).unwrap()).unwrap();
        let eb = embed(&PlacedOperator::new(b, vec![2], ambient).unwrap()).unwrap();
        assert!(lhs.equal(&ea.compose(&eb).unwrap()).unwrap());
    }

    #[test]
    fn disjointly_placed_operators_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let shape1 = SpaceShape::new(2, 1).unwrap();
        let ambient = SpaceShape::new(2, 3).unwrap();
        for _ in 0..8 {
            let a = random_dense(q(), shape1, &mut rng);
            let b = random_dense(q(), shape1, &mut rng);
            let ea = embed(&PlacedOperator::new(a, vec![1], ambient).unwrap()).unwrap();
            let eb = embed(&PlacedOperator::new(b, vec![3], ambient).unwrap()).unwrap();
            assert!(ea.commutator(&eb).unwrap().is_zero());
        }
    }

    #[test]
    fn trace_is_cyclic() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let shape = SpaceShape::new(2, 2).unwrap();
        for _ in 0..8 {
            let a = random_dense(q(), shape, &mut rng);
            let b = random_dense(q(), shape, &mut rng);
            let ab = a.compose(&b).unwrap().full_trace().unwrap();
            let ba = b.compose(&a).unwrap().full_trace().unwrap();
            assert_eq!(ab, ba);
        }
    }

    #[test]
    fn monomial_dense_composition_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let shape = SpaceShape::new(2, 2).unwrap();
        let n = shape.total();
        // random monomial pair: permutation with random nonzero scalars
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let mk = |perm: &[usize], rng: &mut ChaCha8Rng| {
            let entries = perm
                .iter()
                .map(|&o| {
                    let mut s = q().random_small(rng);
                    if s.is_zero() {
                        s = q().one();
                    }
                    (o, s)
                })
                .collect();
            TensorOperator::monomial(q(), shape, entries).unwrap()
        };
        let a = mk(&perm, &mut rng);
        perm.rotate_left(1);
        let b = mk(&perm, &mut rng);
        let fast = a.compose(&b).unwrap();
        let dense = a.to_dense().unwrap().compose(&b.to_dense().unwrap()).unwrap();
        assert!(fast.equal(&dense).unwrap());
        assert!(fast.is_monomial());
        assert!(!dense.is_monomial());
    }

    #[test]
    fn product_of_placed_matches_embedded_product() {
        let ambient = SpaceShape::new(2, 3).unwrap();
        let p = TensorOperator::transposition(q(), 2).unwrap();
        let f1 = PlacedOperator::new(p.clone(), vec![1, 2], ambient).unwrap();
        let f2 = PlacedOperator::new(p.clone(), vec![2, 3], ambient).unwrap();
        let prod = product_of_placed(q(), ambient, &[f1.clone(), f2.clone()]).unwrap();
        let explicit = embed(&f1).unwrap().compose(&embed(&f2).unwrap()).unwrap();
        assert!(prod.equal(&explicit).unwrap());
        // order sensitivity: swapping the factors changes the permutation
        let swapped = product_of_placed(q(), ambient, &[f2, f1]).unwrap();
        assert!(!prod.equal(&swapped).unwrap());
    }

    #[test]
    fn budget_is_enforced() {
        let old = dense_budget();
        set_dense_budget(8);
        let shape = SpaceShape::new(2, 3).unwrap();
        let err = TensorOperator::identity(q(), shape).to_dense();
        set_dense_budget(old);
        assert!(matches!(err, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn json_round_trip_monomial_and_dense() {
        let p = TensorOperator::transposition(q(), 2).unwrap();
        let back = TensorOperator::from_json(&p.to_json()).unwrap();
        assert!(p.equal(&back).unwrap());
        let d = p.to_dense().unwrap();
        let back = TensorOperator::from_json(&d.to_json()).unwrap();
        assert!(d.equal(&back).unwrap());
    }

    #[test]
    fn regroup_views_fat_slots() {
        let p = TensorOperator::block_transposition(q(), 2, 2).unwrap();
        let fat = p.regroup(4, 2).unwrap();
        let pw = TensorOperator::transposition(q(), 4).unwrap();
        assert!(fat.equal(&pw).unwrap());
    }
}
