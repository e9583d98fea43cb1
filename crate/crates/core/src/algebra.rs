//! Cayley-Dickson algebras of dimension 1, 2, 4 and 8.
//!
//! Elements are stored as fixed arrays of eight coordinates with a runtime
//! dimension, so they are `Copy` and never allocate. Multiplication follows the
//! doubling rule
//!
//! ```text
//! (A, B) * (C, D) = (A C - D* B,  D A + B C*)
//! ```
//!
//! applied recursively down to real multiplication. With this convention the
//! basis elements of the quaternions satisfy `i j = k`. Any fixed convention
//! works for reconciliation as long as both parties use the same one.
//!
//! All four algebras are composition algebras: `|a b| = |a| |b|`. The octonions
//! (dimension 8) are not associative but they are alternative, which is enough
//! for `(u * y^-1) * y = u` to hold.

use std::fmt;

use crate::error::{invalid, Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 8;

/// Norms below this are treated as zero when inverting.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// An element of the real, complex, quaternion or octonion algebra.
#[derive(Clone, Copy, PartialEq)]
pub struct CdElement {
    dim: usize,
    coords: [f64; MAX_DIM],
}

impl fmt::Debug for CdElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("CdElement").field(&self.coords()).finish()
    }
}

/// Checks that `dim` is one of 1, 2, 4, 8.
pub fn validate_dim(dim: usize) -> Result<()> {
    match dim {
        1 | 2 | 4 | 8 => Ok(()),
        _ => invalid(format!("dimension must be 1, 2, 4 or 8, got {dim}")),
    }
}

impl CdElement {
    /// Builds an element from its coordinates. The length selects the algebra.
    pub fn new(coords: &[f64]) -> Result<Self> {
        validate_dim(coords.len())?;
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return invalid(format!("non-finite coordinate {c}"));
        }
        let mut out = Self::zero(coords.len());
        out.coords[..coords.len()].copy_from_slice(coords);
        Ok(out)
    }

    fn zero(dim: usize) -> Self {
        Self {
            dim,
            coords: [0.0; MAX_DIM],
        }
    }

    /// The multiplicative identity `(1, 0, ..., 0)`.
    pub fn one(dim: usize) -> Result<Self> {
        validate_dim(dim)?;
        let mut out = Self::zero(dim);
        out.coords[0] = 1.0;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    /// Euclidean norm of the coordinates.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coords().iter().map(|c| c * c).sum()
    }

    /// Keeps the real part and negates every imaginary coordinate.
    pub fn conjugate(&self) -> Self {
        let mut out = *self;
        for c in &mut out.coords[1..self.dim] {
            *c = -*c;
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = *self;
        for c in &mut out.coords[..self.dim] {
            *c *= factor;
        }
        out
    }

    /// Cayley-Dickson product. Fails if the dimensions differ.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return invalid(format!(
                "dimension mismatch: {} vs {}",
                self.dim, other.dim
            ));
        }
        let mut out = Self::zero(self.dim);
        mul_into(self.coords(), other.coords(), &mut out.coords[..self.dim]);
        Ok(out)
    }

    /// `conjugate(a) / |a|^2`. Fails when `|a|` is below [`DEGENERATE_NORM`].
    pub fn inverse(&self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if n2.sqrt() < DEGENERATE_NORM {
            return Err(Error::Degenerate(format!(
                "cannot invert element of norm {}",
                n2.sqrt()
            )));
        }
        Ok(self.conjugate().scale(1.0 / n2))
    }
}

fn conj_into(a: &[f64], out: &mut [f64]) {
    out[0] = a[0];
    for (o, x) in out[1..].iter_mut().zip(&a[1..]) {
        *o = -x;
    }
}

fn mul_into(a: &[f64], b: &[f64], out: &mut [f64]) {
    let n = a.len();
    if n == 1 {
        out[0] = a[0] * b[0];
        return;
    }
    let h = n / 2;
    let (aa, ab) = a.split_at(h);
    let (bc, bd) = b.split_at(h);

    let mut conj_c = [0.0; MAX_DIM / 2];
    let mut conj_d = [0.0; MAX_DIM / 2];
    conj_into(bc, &mut conj_c[..h]);
    conj_into(bd, &mut conj_d[..h]);

    let mut ac = [0.0; MAX_DIM / 2];
    let mut db = [0.0; MAX_DIM / 2];
    let mut da = [0.0; MAX_DIM / 2];
    let mut bcc = [0.0; MAX_DIM / 2];
    mul_into(aa, bc, &mut ac[..h]);
    mul_into(&conj_d[..h], ab, &mut db[..h]);
    mul_into(bd, aa, &mut da[..h]);
    mul_into(ab, &conj_c[..h], &mut bcc[..h]);

    for t in 0..h {
        out[t] = ac[t] - db[t];
        out[h + t] = da[t] + bcc[t];
    }
}

/// Free-function form of [`CdElement::multiply`].
pub fn cd_multiply(a: &CdElement, b: &CdElement) -> Result<CdElement> {
    a.multiply(b)
}

pub fn cd_conjugate(a: &CdElement) -> CdElement {
    a.conjugate()
}

pub fn cd_inverse(a: &CdElement) -> Result<CdElement> {
    a.inverse()
}

pub fn cd_norm(a: &CdElement) -> f64 {
    a.norm()
}
